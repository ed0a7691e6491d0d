//! Metrics, multi-seed aggregation and the experimental protocols.
//!
//! Every protocol is a grid of independent cells (config × seed, question,
//! fraction × seed). Cells run through [`Execution`], each with its own
//! backend instance, and are assembled in grid order, so results do not
//! depend on scheduling. The first failing cell (in grid order) aborts the
//! protocol.

mod baseline;
mod metrics;
mod report;

pub use baseline::{ConstantScorer, FittedScorer, GoldScorer, NearestNeighborScorer, ScorePredictor, ScoreSample};
pub use metrics::{
    aggregate_seeds, compute_metrics, compute_multiclass, summarize, ConfusionCounts, MetricValues, MetricsError,
    MetricsReport, MulticlassReport, RunSummary, Summary,
};
pub use report::{
    emit_comparison, emit_curve, emit_report, percent_cell, unit_cell, ReportError, ReportFormat,
};

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{holdout_question_split, make_split, subsample_train, Corpus, Partition, SplitAssignment};
use crate::entailment::{
    build_pairs_with, fit, predict_batched, Backend, BackendConfig, BackendError, BackendRegistry, EntailmentBackend,
    EntailmentPair, PairOptions, TrainingLog,
};
use crate::exec::Execution;
use crate::points::{format_rational, Rational};

/// The 80/10/10 per-question train/val/test split.
pub fn default_split_fractions() -> [Rational; 3] {
    [Rational::new(4, 5), Rational::new(1, 10), Rational::new(1, 10)]
}

/// Training fractions of the sweep: 5%, 10%, 20%, 40%, 80%.
pub fn default_sweep_fractions() -> Vec<Rational> {
    [20, 10, 5].iter().map(|&d| Rational::new(1, d)).chain([Rational::new(2, 5), Rational::new(4, 5)]).collect()
}

pub fn default_val_fraction() -> Rational {
    Rational::new(1, 10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Benchmark,
    ScoreBaseline,
    Coldstart,
    FractionSweep,
}

impl Protocol {
    pub fn title(self) -> &'static str {
        match self {
            Protocol::Benchmark => "Benchmark",
            Protocol::ScoreBaseline => "Score-based baseline",
            Protocol::Coldstart => "Unseen questions",
            Protocol::FractionSweep => "Training fraction sweep",
        }
    }

    /// Header of the condition column, if rows have conditions.
    pub fn condition_label(self) -> Option<&'static str> {
        match self {
            Protocol::Coldstart => Some("Unseen"),
            Protocol::FractionSweep => Some("Fraction"),
            _ => None,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Benchmark => "benchmark",
            Protocol::ScoreBaseline => "score-baseline",
            Protocol::Coldstart => "coldstart",
            Protocol::FractionSweep => "fraction-sweep",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub corpus_sha256: String,
    pub seeds: Vec<u64>,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_epoch: Option<usize>,
}

impl MetricValues for RunRecord {
    fn values(&self) -> [f64; 4] {
        [self.accuracy, self.precision, self.recall, self.f1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    pub summary: RunSummary,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub protocol: Protocol,
    pub provenance: Provenance,
    pub rows: Vec<ResultRow>,
}

impl ProtocolResult {
    pub fn row(&self, model: &str, condition: Option<&str>) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.model == model && r.condition.as_deref() == condition)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("{context}: {source}")]
    Backend {
        context: String,
        #[source]
        source: BackendError,
    },
    #[error("{context}: {message}")]
    Data { context: String, message: String },
    #[error("{0}")]
    Config(String),
    #[error("results are not comparable: {0}")]
    Mismatch(String),
}

impl ProtocolError {
    fn data(context: &str, message: impl fmt::Display) -> Self {
        ProtocolError::Data { context: context.to_string(), message: message.to_string() }
    }

    fn backend(context: &str, source: BackendError) -> Self {
        ProtocolError::Backend { context: context.to_string(), source }
    }
}

/// Outcome of training (if needed) and testing one backend on one split.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub metrics: MetricsReport,
    pub training: Option<TrainingLog>,
}

/// Runs protocols against backends resolved through a registry.
#[derive(Clone)]
pub struct Harness {
    pub registry: BackendRegistry,
    pub exec: Execution,
    /// Pairs per prediction batch.
    pub batch: usize,
}

impl Default for Harness {
    fn default() -> Self {
        Harness { registry: BackendRegistry::default(), exec: Execution::default(), batch: 256 }
    }
}

impl Harness {
    pub fn with_execution(exec: Execution) -> Self {
        Harness { exec, ..Default::default() }
    }

    /// Instantiates `config`, fitting it on `train`/`val` when trainable.
    pub fn prepare(
        &self,
        config: &BackendConfig,
        train: &[EntailmentPair],
        val: &[EntailmentPair],
    ) -> Result<(Box<dyn EntailmentBackend>, Option<TrainingLog>), BackendError> {
        match self.registry.instantiate(config)? {
            Backend::Ready(b) => Ok((b, None)),
            Backend::Trainable(runtime) => {
                let (fitted, log) = fit(runtime, train, val, config)?;
                Ok((Box::new(fitted), Some(log)))
            }
        }
    }

    /// Fits on the train/val partitions of `split` and scores the test partition.
    pub fn evaluate_split(
        &self,
        corpus: &Corpus,
        config: &BackendConfig,
        split: &SplitAssignment,
        context: &str,
    ) -> Result<CellOutcome, ProtocolError> {
        let options = PairOptions { prepend_question: config.prepend_question };
        let pairs = |p| build_pairs_with(corpus, Some((split, p)), options);
        let (train, val, test) = (pairs(Partition::Train), pairs(Partition::Val), pairs(Partition::Test));
        let (backend, training) = self.prepare(config, &train, &val).map_err(|e| ProtocolError::backend(context, e))?;
        let predictions =
            predict_batched(backend.as_ref(), &test, self.exec, self.batch).map_err(|e| ProtocolError::backend(context, e))?;
        let gold: Vec<bool> = test
            .iter()
            .enumerate()
            .map(|(index, p)| p.gold.ok_or(BackendError::Unlabeled { index }))
            .collect::<Result<_, _>>()
            .map_err(|e| ProtocolError::backend(context, e))?;
        let predicted: Vec<bool> = predictions.iter().map(|p| p.label).collect();
        let metrics = compute_metrics(&gold, &predicted).map_err(|e| ProtocolError::data(context, format!("test set: {e}")))?;
        Ok(CellOutcome { metrics, training })
    }

    /// Multi-seed benchmark: one row per config, one run per seed, each on
    /// its own `make_split(seed)`. The training seed follows the split seed.
    pub fn run_benchmark(
        &self,
        corpus: &Corpus,
        configs: &[BackendConfig],
        seeds: &[u64],
        fractions: [Rational; 3],
    ) -> Result<ProtocolResult, ProtocolError> {
        require(!configs.is_empty(), "at least one backend config is required")?;
        require_seeds(seeds)?;
        let cells: Vec<(usize, u64)> = (0..configs.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
        let runs = self.exec.try_map(&cells, |&(c, seed)| {
            let config = BackendConfig { seed, ..configs[c].clone() };
            let context = format!("{} seed {seed}", config.display_name());
            let split = make_split(corpus, fractions, seed).map_err(|e| ProtocolError::data(&context, e))?;
            let outcome = self.evaluate_split(corpus, &config, &split, &context)?;
            Ok(record(seed, &outcome))
        })?;
        let rows = configs
            .iter()
            .zip(runs.chunks(seeds.len()))
            .map(|(config, runs)| row(config.display_name(), None, runs.to_vec()))
            .collect();
        Ok(ProtocolResult {
            protocol: Protocol::Benchmark,
            provenance: Provenance {
                corpus_sha256: corpus.content_hash(),
                seeds: seeds.to_vec(),
                config: json!({ "backends": configs, "split_fractions": fraction_strings(&fractions) }),
            },
            rows,
        })
    }

    /// Score-based formulation: predict each test response's total score
    /// directly. Metrics are multiclass accuracy and macro P/R/F1 over the
    /// observed score classes.
    pub fn run_score_baseline(
        &self,
        corpus: &Corpus,
        predictor: &dyn ScorePredictor,
        seeds: &[u64],
        fractions: [Rational; 3],
    ) -> Result<ProtocolResult, ProtocolError> {
        require_seeds(seeds)?;
        let samples = baseline::samples(corpus).map_err(|m| ProtocolError::data("score baseline", m))?;
        let runs = self.exec.try_map(seeds, |&seed| {
            let context = format!("{} seed {seed}", predictor.name());
            let split = make_split(corpus, fractions, seed).map_err(|e| ProtocolError::data(&context, e))?;
            let lookup = split.lookup();
            let lookup = &lookup;
            let in_part = |p| samples.iter().filter(move |s| lookup.get(s.response_id.as_str()) == Some(&p)).cloned();
            let train: Vec<ScoreSample> = in_part(Partition::Train).collect();
            let fitted = predictor.fit(&train);
            let mut gold = Vec::new();
            let mut predicted = Vec::new();
            for s in in_part(Partition::Test) {
                let y = fitted.predict(&s);
                if !(0..=s.max).contains(&y) {
                    return Err(ProtocolError::data(
                        &context,
                        format!("predicted score {y} for {} is outside 0..={}", s.response_id, s.max),
                    ));
                }
                gold.push(s.gold);
                predicted.push(y);
            }
            let m = compute_multiclass(&gold, &predicted).map_err(|e| ProtocolError::data(&context, format!("test set: {e}")))?;
            Ok(RunRecord { seed, accuracy: m.accuracy, precision: m.precision, recall: m.recall, f1: m.f1, selected_epoch: None })
        })?;
        Ok(ProtocolResult {
            protocol: Protocol::ScoreBaseline,
            provenance: Provenance {
                corpus_sha256: corpus.content_hash(),
                seeds: seeds.to_vec(),
                config: json!({ "predictor": predictor.name(), "split_fractions": fraction_strings(&fractions) }),
            },
            rows: vec![row(predictor.name(), None, runs)],
        })
    }

    /// Leave-one-question-out: one row per held-out question, seeded by
    /// `config.seed`.
    pub fn run_coldstart(
        &self,
        corpus: &Corpus,
        config: &BackendConfig,
        val_fraction: Rational,
    ) -> Result<ProtocolResult, ProtocolError> {
        require(corpus.questions().len() >= 2, "cold start needs at least two questions")?;
        let questions: Vec<&str> = corpus.questions().iter().map(|q| q.id.as_str()).collect();
        let runs = self.exec.try_map(&questions, |&q| {
            let context = format!("{} held-out {q}", config.display_name());
            let split =
                holdout_question_split(corpus, q, val_fraction, config.seed).map_err(|e| ProtocolError::data(&context, e))?;
            let outcome = self.evaluate_split(corpus, config, &split, &context)?;
            Ok(record(config.seed, &outcome))
        })?;
        let rows = questions
            .iter()
            .zip(runs)
            .map(|(q, run)| row(config.display_name(), Some(q.to_string()), vec![run]))
            .collect();
        Ok(ProtocolResult {
            protocol: Protocol::Coldstart,
            provenance: Provenance {
                corpus_sha256: corpus.content_hash(),
                seeds: vec![config.seed],
                config: json!({ "backend": config, "val_fraction": format_rational(&val_fraction) }),
            },
            rows,
        })
    }

    /// Learning curve over training fractions. Each (fraction, seed) cell is
    /// `make_split(seed)` followed by `subsample_train(fraction, seed)`.
    pub fn run_fraction_sweep(
        &self,
        corpus: &Corpus,
        config: &BackendConfig,
        fractions: &[Rational],
        seeds: &[u64],
        split_fractions: [Rational; 3],
    ) -> Result<ProtocolResult, ProtocolError> {
        require(!fractions.is_empty(), "at least one training fraction is required")?;
        require_seeds(seeds)?;
        for f in fractions {
            require(*f > Rational::from_integer(0) && *f <= Rational::from_integer(1), "training fractions must lie in (0, 1]")?;
        }
        let cells: Vec<(usize, u64)> = (0..fractions.len()).flat_map(|f| seeds.iter().map(move |&s| (f, s))).collect();
        let runs = self.exec.try_map(&cells, |&(f, seed)| {
            let config = BackendConfig { seed, ..config.clone() };
            let context = format!("{} fraction {} seed {seed}", config.display_name(), fraction_label(&fractions[f]));
            let split = make_split(corpus, split_fractions, seed)
                .and_then(|s| subsample_train(&s, corpus, fractions[f], seed))
                .map_err(|e| ProtocolError::data(&context, e))?;
            let outcome = self.evaluate_split(corpus, &config, &split, &context)?;
            Ok(record(seed, &outcome))
        })?;
        let rows = fractions
            .iter()
            .zip(runs.chunks(seeds.len()))
            .map(|(f, runs)| row(config.display_name(), Some(fraction_label(f)), runs.to_vec()))
            .collect();
        Ok(ProtocolResult {
            protocol: Protocol::FractionSweep,
            provenance: Provenance {
                corpus_sha256: corpus.content_hash(),
                seeds: seeds.to_vec(),
                config: json!({
                    "backend": config,
                    "fractions": fraction_strings(fractions),
                    "split_fractions": fraction_strings(&split_fractions),
                }),
            },
            rows,
        })
    }
}

fn require(ok: bool, message: &str) -> Result<(), ProtocolError> {
    if ok {
        Ok(())
    } else {
        Err(ProtocolError::Config(message.to_string()))
    }
}

fn require_seeds(seeds: &[u64]) -> Result<(), ProtocolError> {
    require(!seeds.is_empty(), "at least one seed is required")
}

fn record(seed: u64, outcome: &CellOutcome) -> RunRecord {
    let m = &outcome.metrics;
    RunRecord {
        seed,
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        selected_epoch: outcome.training.as_ref().map(|t| t.selected_epoch),
    }
}

fn row(model: String, condition: Option<String>, runs: Vec<RunRecord>) -> ResultRow {
    let summary = aggregate_seeds(&runs).expect("every row has at least one run");
    ResultRow { model, condition, summary, runs }
}

fn fraction_strings(fractions: &[Rational]) -> Vec<String> {
    fractions.iter().map(format_rational).collect()
}

/// Decimal label of a fraction, e.g. `0.05`.
pub fn fraction_label(f: &Rational) -> String {
    format!("{}", *f.numer() as f64 / *f.denom() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub rubric_model: String,
    pub score_model: String,
    pub rubric_accuracy: f64,
    pub score_accuracy: f64,
    pub delta_accuracy: f64,
    pub rubric_f1: f64,
    pub score_f1: f64,
    pub delta_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub corpus_sha256: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<ComparisonRow>,
}

/// Rubric minus score deltas of mean accuracy and F1. Rows are paired by
/// position; both results must come from the same corpus and seeds.
pub fn compare_formulations(rubric: &ProtocolResult, score: &ProtocolResult) -> Result<Comparison, ProtocolError> {
    let (a, b) = (&rubric.provenance, &score.provenance);
    if a.corpus_sha256 != b.corpus_sha256 {
        return Err(ProtocolError::Mismatch(format!("corpus {} vs {}", a.corpus_sha256, b.corpus_sha256)));
    }
    if a.seeds != b.seeds {
        return Err(ProtocolError::Mismatch(format!("seeds {:?} vs {:?}", a.seeds, b.seeds)));
    }
    if rubric.rows.len() != score.rows.len() || rubric.rows.is_empty() {
        return Err(ProtocolError::Mismatch(format!(
            "{} rubric rows vs {} score rows",
            rubric.rows.len(),
            score.rows.len()
        )));
    }
    let rows = rubric
        .rows
        .iter()
        .zip(&score.rows)
        .map(|(r, s)| ComparisonRow {
            rubric_model: r.model.clone(),
            score_model: s.model.clone(),
            rubric_accuracy: r.summary.accuracy.mean,
            score_accuracy: s.summary.accuracy.mean,
            delta_accuracy: r.summary.accuracy.mean - s.summary.accuracy.mean,
            rubric_f1: r.summary.f1.mean,
            score_f1: s.summary.f1.mean,
            delta_f1: r.summary.f1.mean - s.summary.f1.mean,
        })
        .collect();
    Ok(Comparison { corpus_sha256: a.corpus_sha256.clone(), seeds: a.seeds.clone(), rows })
}
