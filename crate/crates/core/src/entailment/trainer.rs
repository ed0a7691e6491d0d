//! Fine-tuning loop for trainable backends.
//!
//! The engine owns pairing, per-epoch seeded shuffling, batching, epoch
//! accounting and model selection; a [`ModelRuntime`] owns the forward and
//! backward passes. Selection keeps the epoch snapshot with the highest
//! validation F1, earliest epoch on ties. There is no early stopping: a
//! successful fit always runs exactly `max_epochs` epochs.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_alignment, BackendConfig, BackendError, EntailmentBackend, EntailmentPair, Prediction};
use crate::evaluation::compute_metrics;
use crate::seeding::rng_for;
use crate::text::word_count;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub learning_rate: f64,
    /// AdamW `(beta1, beta2)`.
    pub betas: [f64; 2],
}

#[derive(Debug, Clone, Copy)]
pub struct TrainStep<'a> {
    pub epoch: usize,
    pub batch: usize,
    pub seed: u64,
    pub optimizer: &'a OptimizerSettings,
}

/// The model side of a trainable backend.
pub trait ModelRuntime: Send + Sync {
    /// Checkpoint id this runtime was initialized from.
    fn initialization(&self) -> &str;

    /// Longest accepted input in whitespace tokens (premise + hypothesis).
    /// Longer inputs are rejected, never truncated.
    fn max_input_tokens(&self) -> Option<usize> {
        None
    }

    fn train_batch(&mut self, batch: &[&EntailmentPair], step: &TrainStep<'_>) -> Result<(), BackendError>;

    fn predict(&self, pairs: &[EntailmentPair]) -> Result<Vec<Prediction>, BackendError>;

    /// Complete model state; [`restore`](Self::restore) must accept it.
    fn snapshot(&self) -> serde_json::Value;

    fn restore(&mut self, state: &serde_json::Value) -> Result<(), BackendError>;

    fn concurrent(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub val_f1: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub selected_epoch: usize,
}

impl TrainingLog {
    /// Index of the maximal validation F1, earliest on ties.
    pub fn best_epoch(records: &[EpochRecord]) -> Option<usize> {
        let mut best: Option<&EpochRecord> = None;
        for r in records {
            if best.is_none_or(|b| r.val_f1 > b.val_f1) {
                best = Some(r);
            }
        }
        best.map(|r| r.epoch)
    }
}

/// A fitted (or checkpoint-initialized) runtime exposed as a backend.
pub struct TrainableBackend {
    runtime: Box<dyn ModelRuntime>,
}

/// Serialized form of a trained backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedModel {
    pub initialization: String,
    pub state: serde_json::Value,
}

impl TrainableBackend {
    pub fn new(runtime: Box<dyn ModelRuntime>) -> Self {
        TrainableBackend { runtime }
    }

    pub fn runtime(&self) -> &dyn ModelRuntime {
        self.runtime.as_ref()
    }

    pub fn save(&self) -> SavedModel {
        SavedModel { initialization: self.runtime.initialization().to_string(), state: self.runtime.snapshot() }
    }
}

impl EntailmentBackend for TrainableBackend {
    fn name(&self) -> String {
        format!("trainable({})", self.runtime.initialization())
    }

    fn predict(&self, pairs: &[EntailmentPair]) -> Result<Vec<Prediction>, BackendError> {
        check_lengths(self.runtime.as_ref(), pairs, 0)?;
        let predictions = self.runtime.predict(pairs)?;
        check_alignment(pairs, &predictions)?;
        Ok(predictions)
    }

    fn concurrent(&self) -> bool {
        self.runtime.concurrent()
    }
}

fn check_lengths(runtime: &dyn ModelRuntime, pairs: &[EntailmentPair], offset: usize) -> Result<(), BackendError> {
    if let Some(limit) = runtime.max_input_tokens() {
        for (i, p) in pairs.iter().enumerate() {
            let tokens = word_count(&p.premise) + word_count(&p.hypothesis);
            if tokens > limit {
                return Err(BackendError::InputTooLong { index: i + offset, tokens, limit });
            }
        }
    }
    Ok(())
}

fn gold_labels(pairs: &[EntailmentPair], offset: usize) -> Result<Vec<bool>, BackendError> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| p.gold.ok_or(BackendError::Unlabeled { index: i + offset }))
        .collect()
}

/// Trains `runtime` on `train` and returns the snapshot with the best
/// validation F1 together with the per-epoch log.
///
/// Pair indices in errors count through `train` first, then `val`.
pub fn fit(
    mut runtime: Box<dyn ModelRuntime>,
    train: &[EntailmentPair],
    val: &[EntailmentPair],
    config: &BackendConfig,
) -> Result<(TrainableBackend, TrainingLog), BackendError> {
    config.validate().map_err(|e| BackendError::Config(e.0))?;
    if train.is_empty() {
        return Err(BackendError::EmptySet("training"));
    }
    if val.is_empty() {
        return Err(BackendError::EmptySet("validation"));
    }
    gold_labels(train, 0)?;
    let val_gold = gold_labels(val, train.len())?;
    check_lengths(runtime.as_ref(), train, 0)?;
    check_lengths(runtime.as_ref(), val, train.len())?;

    let optimizer = config.optimizer();
    let mut records = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(f64, serde_json::Value)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(config.seed, "epoch", &epoch.to_string()));
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let pairs: Vec<&EntailmentPair> = chunk.iter().map(|&i| &train[i]).collect();
            let step = TrainStep { epoch, batch, seed: config.seed, optimizer: &optimizer };
            runtime.train_batch(&pairs, &step)?;
        }

        let predictions = runtime.predict(val)?;
        check_alignment(val, &predictions)?;
        let predicted: Vec<bool> = predictions.iter().map(|p| p.label).collect();
        let metrics = compute_metrics(&val_gold, &predicted).expect("validation set is non-empty and aligned");
        records.push(EpochRecord { epoch, val_f1: metrics.f1, val_accuracy: metrics.accuracy });
        if best.as_ref().is_none_or(|(f1, _)| metrics.f1 > *f1) {
            best = Some((metrics.f1, runtime.snapshot()));
        }
    }

    let (_, state) = best.expect("at least one epoch ran");
    runtime.restore(&state)?;
    let selected_epoch = TrainingLog::best_epoch(&records).expect("at least one epoch ran");
    Ok((TrainableBackend::new(runtime), TrainingLog { epochs: records, selected_epoch }))
}
