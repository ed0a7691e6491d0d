//! A deterministic stand-in for a fine-tuned classifier.
//!
//! Training memorizes labeled pairs. Each time a pair is presented it is
//! retained with probability `retention` (a pure hash of seed, epoch and
//! pair), so later epochs know more than earlier ones. Prediction:
//!
//! * premise seen with this rubric item: the memorized label, score ±1;
//! * rubric item seen but premise new: vote among the memorized premises
//!   that agree with the query on the most hypothesis tokens, score
//!   ±agreement/2 (0 on a split vote);
//! * rubric item never seen: FALSE, score −1.
//!
//! The last rule gives the stub no transfer to unseen questions.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::registry::MEMORIZER_ID;
use super::trainer::{ModelRuntime, TrainStep};
use super::{BackendError, EntailmentPair, Prediction};
use crate::seeding::unit_hash;
use crate::text::{content_tokens, tokens};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Entry {
    premise: String,
    /// Hypothesis tokens present in the premise.
    present: BTreeSet<String>,
    label: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct ItemMemory {
    hypothesis_tokens: BTreeSet<String>,
    /// Keyed by response id.
    entries: BTreeMap<String, Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct State {
    retention: f64,
    memory: BTreeMap<String, ItemMemory>,
}

#[derive(Debug, Clone)]
pub struct MemorizingRuntime {
    initialization: String,
    state: State,
}

pub const DEFAULT_RETENTION: f64 = 0.5;

impl MemorizingRuntime {
    pub fn new(retention: f64) -> Self {
        let initialization = if retention == DEFAULT_RETENTION {
            MEMORIZER_ID.to_string()
        } else {
            format!("{MEMORIZER_ID}?retention={retention}")
        };
        MemorizingRuntime { initialization, state: State { retention, memory: BTreeMap::new() } }
    }

    /// Accepts `builtin:memorizer` with an optional `?retention=<r>` suffix.
    pub fn from_initialization(id: &str) -> Result<Self, BackendError> {
        let rest = id
            .strip_prefix(MEMORIZER_ID)
            .ok_or_else(|| BackendError::Config(format!("not a memorizer id: {id:?}")))?;
        let retention = match rest {
            "" => DEFAULT_RETENTION,
            query => query
                .strip_prefix("?retention=")
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|r| (0.0..=1.0).contains(r) && *r > 0.0)
                .ok_or_else(|| BackendError::Config(format!("bad memorizer option {query:?}")))?,
        };
        Ok(MemorizingRuntime::new(retention))
    }

    pub fn memorized(&self) -> usize {
        self.state.memory.values().map(|m| m.entries.len()).sum()
    }

    fn predict_one(&self, pair: &EntailmentPair) -> f64 {
        let Some(item) = self.state.memory.get(&pair.rubric_item_id) else {
            return -1.0;
        };
        if let Some(e) = item.entries.values().find(|e| e.premise == pair.premise) {
            return if e.label { 1.0 } else { -1.0 };
        }
        let premise: HashSet<String> = tokens(&pair.premise).collect();
        let query: BTreeSet<&String> = item.hypothesis_tokens.iter().filter(|t| premise.contains(*t)).collect();
        let n = item.hypothesis_tokens.len();
        let mut best = 0usize;
        let mut votes = 0i64;
        for e in item.entries.values() {
            let disagreements = query.iter().filter(|t| !e.present.contains(**t)).count()
                + e.present.iter().filter(|t| !query.contains(t)).count();
            let agreement = n - disagreements;
            let vote = if e.label { 1 } else { -1 };
            if agreement > best {
                best = agreement;
                votes = vote;
            } else if agreement == best {
                votes += vote;
            }
        }
        let magnitude = if n == 0 { 0.25 } else { 0.5 * best as f64 / n as f64 };
        match votes.signum() {
            1 => magnitude,
            -1 => -magnitude,
            _ => 0.0,
        }
    }
}

impl ModelRuntime for MemorizingRuntime {
    fn initialization(&self) -> &str {
        &self.initialization
    }

    fn train_batch(&mut self, batch: &[&EntailmentPair], step: &TrainStep<'_>) -> Result<(), BackendError> {
        for pair in batch {
            let Some(label) = pair.gold else {
                return Err(BackendError::Runtime(format!(
                    "unlabeled training pair ({}, {})",
                    pair.response_id, pair.rubric_item_id
                )));
            };
            let key = format!("{}|{}|{}", step.epoch, pair.response_id, pair.rubric_item_id);
            if unit_hash(step.seed, "memorizer-retain", &key) >= self.state.retention {
                continue;
            }
            let item = self.state.memory.entry(pair.rubric_item_id.clone()).or_insert_with(|| ItemMemory {
                hypothesis_tokens: content_tokens(&pair.hypothesis),
                entries: BTreeMap::new(),
            });
            let premise: HashSet<String> = tokens(&pair.premise).collect();
            let present = item.hypothesis_tokens.iter().filter(|t| premise.contains(*t)).cloned().collect();
            item.entries.insert(pair.response_id.clone(), Entry { premise: pair.premise.clone(), present, label });
        }
        Ok(())
    }

    fn predict(&self, pairs: &[EntailmentPair]) -> Result<Vec<Prediction>, BackendError> {
        Ok(pairs.iter().map(|p| Prediction::from_score(p, self.predict_one(p))).collect())
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(&self.state).expect("memorizer state serializes")
    }

    fn restore(&mut self, state: &serde_json::Value) -> Result<(), BackendError> {
        self.state = serde_json::from_value(state.clone())
            .map_err(|e| BackendError::Runtime(format!("bad memorizer snapshot: {e}")))?;
        Ok(())
    }
}
