//! Predictors for the score-based formulation, which maps a whole response
//! to its integer total instead of judging rubric items.

use std::collections::BTreeSet;

use crate::corpus::Corpus;
use crate::text::content_tokens;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreSample {
    pub response_id: String,
    pub question_id: String,
    pub text: String,
    /// Reference total: points of the gold-TRUE rubric items.
    pub gold: i64,
    /// Maximum total for the question.
    pub max: i64,
}

/// One sample per response, in corpus order. Totals must be whole numbers.
pub(super) fn samples(corpus: &Corpus) -> Result<Vec<ScoreSample>, String> {
    corpus
        .responses()
        .iter()
        .map(|r| {
            let gold = corpus.gold_points(&r.id).and_then(|p| p.as_integer());
            let max = corpus.max_points(&r.question_id).as_integer();
            match (gold, max) {
                (Some(gold), Some(max)) => Ok(ScoreSample {
                    response_id: r.id.clone(),
                    question_id: r.question_id.clone(),
                    text: r.text.clone(),
                    gold,
                    max,
                }),
                _ => Err(format!("response {} has a non-integer reference or maximum score", r.id)),
            }
        })
        .collect()
}

pub trait ScorePredictor: Send + Sync {
    fn name(&self) -> String;

    fn fit(&self, train: &[ScoreSample]) -> Box<dyn FittedScorer>;
}

pub trait FittedScorer: Send + Sync {
    /// Must return a value in `0..=query.max`.
    fn predict(&self, query: &ScoreSample) -> i64;
}

/// Reads the reference score. An upper bound for the protocol.
#[derive(Debug, Clone, Copy, Default)]
pub struct GoldScorer;

impl ScorePredictor for GoldScorer {
    fn name(&self) -> String {
        "gold".into()
    }

    fn fit(&self, _train: &[ScoreSample]) -> Box<dyn FittedScorer> {
        Box::new(GoldScorer)
    }
}

impl FittedScorer for GoldScorer {
    fn predict(&self, query: &ScoreSample) -> i64 {
        query.gold
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub i64);

impl ScorePredictor for ConstantScorer {
    fn name(&self) -> String {
        format!("constant({})", self.0)
    }

    fn fit(&self, _train: &[ScoreSample]) -> Box<dyn FittedScorer> {
        Box::new(*self)
    }
}

impl FittedScorer for ConstantScorer {
    fn predict(&self, _query: &ScoreSample) -> i64 {
        self.0
    }
}

/// Copies the score of the most similar training response to the same
/// question, by Jaccard similarity of content tokens. Ties go to the
/// earliest training response; a question without training responses
/// gets 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct NearestNeighborScorer;

struct FittedNeighbors {
    train: Vec<(String, BTreeSet<String>, i64)>,
}

impl ScorePredictor for NearestNeighborScorer {
    fn name(&self) -> String {
        "nearest-neighbor".into()
    }

    fn fit(&self, train: &[ScoreSample]) -> Box<dyn FittedScorer> {
        Box::new(FittedNeighbors {
            train: train.iter().map(|s| (s.question_id.clone(), content_tokens(&s.text), s.gold)).collect(),
        })
    }
}

impl FittedScorer for FittedNeighbors {
    fn predict(&self, query: &ScoreSample) -> i64 {
        let q = content_tokens(&query.text);
        // Similarity as (intersection, union), compared by cross-multiplying.
        let mut best: Option<((usize, usize), i64)> = None;
        for (question, tokens, score) in &self.train {
            if *question != query.question_id {
                continue;
            }
            let inter = q.intersection(tokens).count();
            let union = (q.len() + tokens.len() - inter).max(1);
            if best.is_none_or(|((bi, bu), _)| inter * bu > bi * union) {
                best = Some(((inter, union), *score));
            }
        }
        best.map_or(0, |(_, s)| s)
    }
}
