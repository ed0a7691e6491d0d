//! Experiment splits: per-question train/val/test partitions, leave-one-
//! question-out splits and training-set subsampling.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::points::{format_rational, rational, rational_vec, Rational};
use crate::seeding::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Partition::Train),
            "val" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            other => Err(format!("unknown partition {other:?} (expected train, val or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitProvenance {
    /// `fractions` is `[train, val, test]`.
    Fractions {
        seed: u64,
        #[serde(with = "rational_vec")]
        fractions: Vec<Rational>,
    },
    HeldOutQuestion {
        seed: u64,
        held_out_question: String,
        #[serde(with = "rational")]
        val_fraction: Rational,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subsample {
    pub seed: u64,
    #[serde(with = "rational")]
    pub fraction: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitEntry {
    pub response_id: String,
    pub partition: Partition,
}

/// Partition membership for a corpus's responses, in corpus order.
///
/// Freshly made splits assign every response. After [`subsample_train`],
/// dropped training responses are simply absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitAssignment {
    pub provenance: SplitProvenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subsamples: Vec<Subsample>,
    pub assignments: Vec<SplitEntry>,
}

impl SplitAssignment {
    pub fn partition_of(&self, response_id: &str) -> Option<Partition> {
        self.assignments.iter().find(|e| e.response_id == response_id).map(|e| e.partition)
    }

    pub fn lookup(&self) -> HashMap<&str, Partition> {
        self.assignments.iter().map(|e| (e.response_id.as_str(), e.partition)).collect()
    }

    pub fn ids_in(&self, partition: Partition) -> impl Iterator<Item = &str> + '_ {
        self.assignments.iter().filter(move |e| e.partition == partition).map(|e| e.response_id.as_str())
    }

    pub fn count(&self, partition: Partition) -> usize {
        self.ids_in(partition).count()
    }

    /// `[train, val, test]` sizes restricted to one question.
    pub fn sizes_for(&self, corpus: &Corpus, question_id: &str) -> [usize; 3] {
        let lookup = self.lookup();
        let mut sizes = [0; 3];
        for r in corpus.responses_for(question_id) {
            match lookup.get(r.id.as_str()) {
                Some(Partition::Train) => sizes[0] += 1,
                Some(Partition::Val) => sizes[1] += 1,
                Some(Partition::Test) => sizes[2] += 1,
                None => {}
            }
        }
        sizes
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("split serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("question {question_id:?} has {available} response(s); at least {required} are needed for a {required}-way split")]
    TooFewResponses {
        question_id: String,
        available: usize,
        required: usize,
    },
    #[error("unknown question {0:?}")]
    UnknownQuestion(String),
    #[error("a held-out-question split needs at least two questions")]
    SingleQuestion,
    #[error("validation fraction {0} must lie in [0, 1)")]
    InvalidValFraction(String),
    #[error("subsample fraction {0} must lie in (0, 1]")]
    InvalidSubsampleFraction(String),
}

/// Largest-remainder apportionment of `n` items over `fractions`.
///
/// Each share gets `floor(fraction * n)`; leftover units go one at a time to
/// the largest fractional remainders. Equal remainders are broken by
/// `priority`: earlier positions in `priority` win.
pub fn largest_remainder(n: usize, fractions: &[Rational], priority: &[usize]) -> Vec<usize> {
    let total = Ratio::from_integer(n as i64);
    let quotas: Vec<Rational> = fractions.iter().map(|f| f * total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor().to_integer() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = priority.to_vec();
    // stable sort keeps priority order among equal remainders
    order.sort_by(|&a, &b| quotas[b].fract().cmp(&quotas[a].fract()));
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

const TRAIN: usize = 0;
const VAL: usize = 1;
const TEST: usize = 2;
/// Tie rule for leftover units: val, then test, then train.
const TIE_PRIORITY: [usize; 3] = [VAL, TEST, TRAIN];

fn check_fractions(fractions: &[Rational; 3]) -> Result<(), SplitError> {
    if fractions.iter().any(|f| *f <= Rational::zero()) {
        return Err(SplitError::InvalidFractions("every fraction must be positive".into()));
    }
    let sum: Rational = fractions.iter().sum();
    if sum != Rational::one() {
        return Err(SplitError::InvalidFractions(format!("fractions sum to {}, not 1", format_rational(&sum))));
    }
    Ok(())
}

/// Per-question random partition into train/val/test.
///
/// `fractions` is `[train, val, test]`. Partition sizes per question follow
/// [`largest_remainder`]; membership is a seeded shuffle keyed by the
/// question id, so output depends only on `(corpus, fractions, seed)`.
pub fn make_split(corpus: &Corpus, fractions: [Rational; 3], seed: u64) -> Result<SplitAssignment, SplitError> {
    check_fractions(&fractions)?;
    let mut partition_of: HashMap<&str, Partition> = HashMap::new();
    for q in corpus.questions() {
        let mut ids: Vec<&str> = corpus.responses_for(&q.id).map(|r| r.id.as_str()).collect();
        if ids.len() < fractions.len() {
            return Err(SplitError::TooFewResponses {
                question_id: q.id.clone(),
                available: ids.len(),
                required: fractions.len(),
            });
        }
        let sizes = largest_remainder(ids.len(), &fractions, &TIE_PRIORITY);
        ids.shuffle(&mut rng_for(seed, "split", &q.id));
        let (test, rest) = ids.split_at(sizes[TEST]);
        let (val, train) = rest.split_at(sizes[VAL]);
        partition_of.extend(test.iter().map(|id| (*id, Partition::Test)));
        partition_of.extend(val.iter().map(|id| (*id, Partition::Val)));
        partition_of.extend(train.iter().map(|id| (*id, Partition::Train)));
    }
    Ok(SplitAssignment {
        provenance: SplitProvenance::Fractions { seed, fractions: fractions.to_vec() },
        subsamples: Vec::new(),
        assignments: in_corpus_order(corpus, &partition_of),
    })
}

/// Leave-one-question-out split: the held-out question is the test set;
/// every other question contributes a `val_fraction` slice to val and the
/// rest to train.
pub fn holdout_question_split(
    corpus: &Corpus,
    question_id: &str,
    val_fraction: Rational,
    seed: u64,
) -> Result<SplitAssignment, SplitError> {
    if corpus.question(question_id).is_none() {
        return Err(SplitError::UnknownQuestion(question_id.to_string()));
    }
    if corpus.questions().len() < 2 {
        return Err(SplitError::SingleQuestion);
    }
    if val_fraction < Rational::zero() || val_fraction >= Rational::one() {
        return Err(SplitError::InvalidValFraction(format_rational(&val_fraction)));
    }
    let shares = [Rational::one() - val_fraction, val_fraction];
    let mut partition_of: HashMap<&str, Partition> = HashMap::new();
    for q in corpus.questions() {
        let mut ids: Vec<&str> = corpus.responses_for(&q.id).map(|r| r.id.as_str()).collect();
        if q.id == question_id {
            partition_of.extend(ids.iter().map(|id| (*id, Partition::Test)));
            continue;
        }
        let n_val = largest_remainder(ids.len(), &shares, &[1, 0])[1];
        ids.shuffle(&mut rng_for(seed, "holdout-val", &q.id));
        let (val, train) = ids.split_at(n_val);
        partition_of.extend(val.iter().map(|id| (*id, Partition::Val)));
        partition_of.extend(train.iter().map(|id| (*id, Partition::Train)));
    }
    Ok(SplitAssignment {
        provenance: SplitProvenance::HeldOutQuestion {
            seed,
            held_out_question: question_id.to_string(),
            val_fraction,
        },
        subsamples: Vec::new(),
        assignments: in_corpus_order(corpus, &partition_of),
    })
}

/// Keeps a random `ceil(fraction * |train_q|)` of each question's training
/// responses and drops the rest. Val and test are untouched.
pub fn subsample_train(
    split: &SplitAssignment,
    corpus: &Corpus,
    fraction: Rational,
    seed: u64,
) -> Result<SplitAssignment, SplitError> {
    if fraction <= Rational::zero() || fraction > Rational::one() {
        return Err(SplitError::InvalidSubsampleFraction(format_rational(&fraction)));
    }
    let lookup = split.lookup();
    let mut dropped: HashSet<&str> = HashSet::new();
    for q in corpus.questions() {
        let mut train: Vec<&str> = corpus
            .responses_for(&q.id)
            .map(|r| r.id.as_str())
            .filter(|id| lookup.get(id) == Some(&Partition::Train))
            .collect();
        let keep = (fraction * Ratio::from_integer(train.len() as i64)).ceil().to_integer() as usize;
        train.shuffle(&mut rng_for(seed, "subsample", &q.id));
        dropped.extend(&train[keep..]);
    }
    let mut out = split.clone();
    out.assignments.retain(|e| !dropped.contains(e.response_id.as_str()));
    out.subsamples.push(Subsample { seed, fraction });
    Ok(out)
}

fn in_corpus_order(corpus: &Corpus, partition_of: &HashMap<&str, Partition>) -> Vec<SplitEntry> {
    corpus
        .responses()
        .iter()
        .filter_map(|r| {
            partition_of.get(r.id.as_str()).map(|p| SplitEntry { response_id: r.id.clone(), partition: *p })
        })
        .collect()
}
