//! Deterministic lexical-overlap backend.

use super::{BackendError, EntailmentBackend, EntailmentPair, Prediction};
use crate::text::{content_tokens, tokens};

/// Fraction of the hypothesis's content tokens that occur in the premise,
/// with the hypothesis token count.
pub fn lexical_overlap(pair: &EntailmentPair) -> Result<(f64, usize), BackendError> {
    let hypothesis = content_tokens(&pair.hypothesis);
    if hypothesis.is_empty() {
        return Err(BackendError::EmptyHypothesis { rubric_item_id: pair.rubric_item_id.clone() });
    }
    let premise: std::collections::HashSet<String> = tokens(&pair.premise).collect();
    let covered = hypothesis.iter().filter(|t| premise.contains(*t)).count();
    Ok((covered as f64 / hypothesis.len() as f64, hypothesis.len()))
}

/// `score = overlap - threshold`, and a fully covered hypothesis earns an
/// extra half-token margin `1 / (2 |H|)`. The margin makes full coverage
/// entail at every threshold up to and including 1, while partial coverage
/// exactly at the threshold still scores 0 and falls to FALSE.
pub fn lexical_predict(pair: &EntailmentPair, threshold: f64) -> Result<Prediction, BackendError> {
    let (overlap, n) = lexical_overlap(pair)?;
    let mut score = overlap - threshold;
    if overlap == 1.0 {
        score += 0.5 / n as f64;
    }
    Ok(Prediction::from_score(pair, score))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalBackend {
    pub threshold: f64,
}

impl EntailmentBackend for LexicalBackend {
    fn name(&self) -> String {
        format!("lexical(θ={})", self.threshold)
    }

    fn predict(&self, pairs: &[EntailmentPair]) -> Result<Vec<Prediction>, BackendError> {
        pairs.iter().map(|p| lexical_predict(p, self.threshold)).collect()
    }
}
