//! Entailment verdicts for (response, rubric item) pairs.
//!
//! The response is the premise and the rubric item is the hypothesis; a
//! backend answers whether the premise entails the hypothesis. Backends
//! implement [`EntailmentBackend`]. Trainable models plug in one level lower
//! through [`ModelRuntime`], with batching, epoch accounting and model
//! selection owned by [`fit`].

mod config;
mod generative;
mod lexical;
mod memorizer;
mod oracle;
mod registry;
mod trainer;

pub use config::{AdapterConfig, BackendConfig, BackendKind, ConfigError, SelectionMetric};
pub use generative::{
    render_prompt, AdapterError, AnswerLogProbs, GenerationRequest, GenerativeBackend, LogProbAdapter, LogProbRecord,
    ReplayAdapter, SamplingParams, DEFAULT_PROMPT_TEMPLATE,
};
#[cfg(feature = "remote")]
pub use generative::ChatCompletionsAdapter;
pub use lexical::{lexical_predict, LexicalBackend};
pub use memorizer::MemorizingRuntime;
pub use oracle::OracleBackend;
pub use registry::{Backend, BackendRegistry, RuntimeConstructor, MEMORIZER_ID};
pub use trainer::{fit, EpochRecord, ModelRuntime, OptimizerSettings, SavedModel, TrainStep, TrainableBackend, TrainingLog};

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Partition, SplitAssignment};
use crate::exec::Execution;

/// One unit of inference: does `premise` (the response) entail
/// `hypothesis` (the rubric item)?
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntailmentPair {
    pub response_id: String,
    pub rubric_item_id: String,
    pub question_id: String,
    pub premise: String,
    pub hypothesis: String,
    pub gold: Option<bool>,
}

/// A backend verdict. `score` is a signed confidence; positive favours TRUE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub response_id: String,
    pub rubric_item_id: String,
    pub label: bool,
    pub score: f64,
}

impl Prediction {
    /// Label follows the sign of `score`; a score of exactly zero is FALSE.
    pub fn from_score(pair: &EntailmentPair, score: f64) -> Self {
        Prediction {
            response_id: pair.response_id.clone(),
            rubric_item_id: pair.rubric_item_id.clone(),
            label: score > 0.0,
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend {backend} unavailable for pairs {first}..={last}: {reason}")]
    Unavailable {
        backend: String,
        first: usize,
        last: usize,
        reason: String,
    },
    #[error("log-probabilities must be finite (got {lp_true}, {lp_false})")]
    NonFinite { lp_true: f64, lp_false: f64 },
    #[error("pair {index} has no gold label")]
    Unlabeled { index: usize },
    #[error("pair {index} has {tokens} input tokens, over the backend limit of {limit}")]
    InputTooLong { index: usize, tokens: usize, limit: usize },
    #[error("rubric item {rubric_item_id:?} has no content tokens")]
    EmptyHypothesis { rubric_item_id: String },
    #[error("prompt template is missing the {0} placeholder")]
    MissingPlaceholder(&'static str),
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("backend returned {got} predictions for {expected} pairs or misaligned ids at {index}")]
    Misaligned { expected: usize, got: usize, index: usize },
    #[error("model runtime failure: {0}")]
    Runtime(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Shifts pair indices by `offset`, for errors raised on a sub-batch.
    pub fn offset(self, offset: usize) -> Self {
        match self {
            BackendError::Unavailable { backend, first, last, reason } => BackendError::Unavailable {
                backend,
                first: first + offset,
                last: last + offset,
                reason,
            },
            BackendError::Unlabeled { index } => BackendError::Unlabeled { index: index + offset },
            BackendError::InputTooLong { index, tokens, limit } => {
                BackendError::InputTooLong { index: index + offset, tokens, limit }
            }
            BackendError::Misaligned { expected, got, index } => {
                BackendError::Misaligned { expected, got, index: index + offset }
            }
            other => other,
        }
    }
}

/// Anything that can turn pairs into predictions.
///
/// Implementations return exactly one prediction per pair, in input order,
/// or an error; never a partial list.
pub trait EntailmentBackend: Send + Sync {
    fn name(&self) -> String;

    fn predict(&self, pairs: &[EntailmentPair]) -> Result<Vec<Prediction>, BackendError>;

    /// Whether disjoint batches may be predicted from several threads.
    fn concurrent(&self) -> bool {
        true
    }
}

impl<B: EntailmentBackend + ?Sized> EntailmentBackend for Box<B> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn predict(&self, pairs: &[EntailmentPair]) -> Result<Vec<Prediction>, BackendError> {
        (**self).predict(pairs)
    }

    fn concurrent(&self) -> bool {
        (**self).concurrent()
    }
}

/// Pair-building options. The premise is the response text alone unless
/// `prepend_question` is set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairOptions {
    pub prepend_question: bool,
}

/// One pair per (response, rubric item of that response's question), in
/// corpus order, optionally restricted to one partition of a split.
pub fn build_pairs(corpus: &Corpus, subset: Option<(&SplitAssignment, Partition)>) -> Vec<EntailmentPair> {
    build_pairs_with(corpus, subset, PairOptions::default())
}

pub fn build_pairs_with(
    corpus: &Corpus,
    subset: Option<(&SplitAssignment, Partition)>,
    options: PairOptions,
) -> Vec<EntailmentPair> {
    let lookup = subset.map(|(split, partition)| (split.lookup(), partition));
    let mut pairs = Vec::new();
    for response in corpus.responses() {
        if let Some((lookup, partition)) = &lookup {
            if lookup.get(response.id.as_str()) != Some(partition) {
                continue;
            }
        }
        let premise = if options.prepend_question {
            let q = corpus.question(&response.question_id).map(|q| q.text.as_str()).unwrap_or_default();
            format!("{q}\n{}", response.text)
        } else {
            response.text.clone()
        };
        for item in corpus.items_for(&response.question_id) {
            pairs.push(EntailmentPair {
                response_id: response.id.clone(),
                rubric_item_id: item.id.clone(),
                question_id: response.question_id.clone(),
                premise: premise.clone(),
                hypothesis: item.text.clone(),
                gold: corpus.gold(&response.id, &item.id),
            });
        }
    }
    pairs
}

/// Verdict from the log-probabilities of the "True" and "False" answers.
///
/// `score = lp_true - lp_false`; TRUE only when strictly positive.
pub fn decide_from_logprobs(lp_true: f64, lp_false: f64) -> Result<(bool, f64), BackendError> {
    if !lp_true.is_finite() || !lp_false.is_finite() {
        return Err(BackendError::NonFinite { lp_true, lp_false });
    }
    let score = lp_true - lp_false;
    Ok((score > 0.0, score))
}

/// Runs `backend` over `pairs`, splitting into `chunk`-sized batches that
/// run concurrently when both the backend and `exec` allow it, and checks
/// that the output is aligned with the input.
pub fn predict_batched(
    backend: &dyn EntailmentBackend,
    pairs: &[EntailmentPair],
    exec: Execution,
    chunk: usize,
) -> Result<Vec<Prediction>, BackendError> {
    let predictions = if exec.is_parallel() && backend.concurrent() && pairs.len() > chunk {
        let chunks: Vec<(usize, &[EntailmentPair])> =
            pairs.chunks(chunk.max(1)).enumerate().map(|(i, c)| (i * chunk.max(1), c)).collect();
        let parts = exec.try_map(&chunks, |(offset, c)| backend.predict(c).map_err(|e| e.offset(*offset)))?;
        parts.into_iter().flatten().collect()
    } else {
        backend.predict(pairs)?
    };
    check_alignment(pairs, &predictions)?;
    Ok(predictions)
}

pub fn check_alignment(pairs: &[EntailmentPair], predictions: &[Prediction]) -> Result<(), BackendError> {
    if pairs.len() != predictions.len() {
        return Err(BackendError::Misaligned { expected: pairs.len(), got: predictions.len(), index: 0 });
    }
    for (index, (pair, pred)) in pairs.iter().zip(predictions).enumerate() {
        if pair.response_id != pred.response_id || pair.rubric_item_id != pred.rubric_item_id {
            return Err(BackendError::Misaligned { expected: pairs.len(), got: predictions.len(), index });
        }
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum PredictionFileError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

/// Writes one JSON record per line.
pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<(), PredictionFileError> {
    let io = |source| PredictionFileError::Io { path: path.display().to_string(), source };
    let mut out = Vec::new();
    for p in predictions {
        serde_json::to_writer(&mut out, p).expect("prediction serialization is infallible");
        out.push(b'\n');
    }
    fs::File::create(path).and_then(|mut f| f.write_all(&out)).map_err(io)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, PredictionFileError> {
    let display = path.display().to_string();
    let file = fs::File::open(path).map_err(|source| PredictionFileError::Io { path: display.clone(), source })?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| PredictionFileError::Io { path: display.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line).map_err(|e| PredictionFileError::Parse {
            path: display.clone(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}

/// Groups predictions by response id, preserving input order within each group.
pub fn group_by_response(predictions: &[Prediction]) -> HashMap<&str, Vec<&Prediction>> {
    let mut map: HashMap<&str, Vec<&Prediction>> = HashMap::new();
    for p in predictions {
        map.entry(p.response_id.as_str()).or_default().push(p);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::minimal_document;
    use crate::corpus::{generate_synthetic_corpus, make_split, SynthParams};
    use crate::points::parse_rational;

    #[test]
    fn logprob_examples() {
        let (l, s) = decide_from_logprobs(-0.2, -1.5).unwrap();
        assert!(l);
        assert!((s - 1.3).abs() < 1e-12);
        assert_eq!(decide_from_logprobs(-3.0, -1.0).unwrap(), (false, -2.0));
        assert_eq!(decide_from_logprobs(-0.7, -0.7).unwrap(), (false, 0.0));
        assert!(matches!(decide_from_logprobs(f64::NAN, 0.0), Err(BackendError::NonFinite { .. })));
        assert!(decide_from_logprobs(f64::NEG_INFINITY, 0.0).is_err());
    }

    #[test]
    fn pairs_for_one_response_three_items() {
        let mut doc = minimal_document();
        doc.rubric_items.push(crate::corpus::RubricItem {
            id: "i3".into(),
            question_id: "q1".into(),
            text: "Third".into(),
            points: crate::points::Points::integer(1),
        });
        doc.judgments.push(crate::corpus::RubricJudgment {
            response_id: "r1".into(),
            rubric_item_id: "i3".into(),
            label: true,
        });
        let c = Corpus::from_document(doc).unwrap();
        let pairs = build_pairs(&c, None);
        assert_eq!(pairs.len(), 3);
        assert!(pairs.iter().all(|p| p.premise == c.responses()[0].text));
        assert_eq!(pairs[2].gold, Some(true));
    }

    #[test]
    fn prepend_question_flag() {
        let c = Corpus::from_document(minimal_document()).unwrap();
        let pairs = build_pairs_with(&c, None, PairOptions { prepend_question: true });
        assert!(pairs[0].premise.starts_with("Explain gas laws.\n"));
    }

    #[test]
    fn test_partition_pair_count_matches_enumeration() {
        let c = generate_synthetic_corpus(&SynthParams::default(), 7).unwrap();
        let fr = [parse_rational("0.8").unwrap(), parse_rational("0.1").unwrap(), parse_rational("0.1").unwrap()];
        let split = make_split(&c, fr, 7).unwrap();
        let pairs = build_pairs(&c, Some((&split, Partition::Test)));
        let mut expected = 0;
        for q in c.questions() {
            let n_test = c.responses_for(&q.id).filter(|r| split.partition_of(&r.id) == Some(Partition::Test)).count();
            expected += n_test * c.items_for(&q.id).count();
        }
        assert_eq!(pairs.len(), expected);
        assert!(pairs.iter().all(|p| c.rubric_item(&p.rubric_item_id).unwrap().question_id == p.question_id));
    }

    #[test]
    fn predictions_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let preds = vec![
            Prediction { response_id: "r1".into(), rubric_item_id: "i1".into(), label: true, score: 0.25 },
            Prediction { response_id: "r1".into(), rubric_item_id: "i2".into(), label: false, score: -1.0 },
        ];
        write_predictions(&path, &preds).unwrap();
        assert_eq!(read_predictions(&path).unwrap(), preds);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), r#"{"response_id":"r1","rubric_item_id":"i1","label":true,"score":0.25}"#);
    }
}
