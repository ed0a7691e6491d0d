//! Synthetic corpora with planted labels.
//!
//! Every rubric item owns a disjoint set of invented keywords and its text
//! consists of those keywords joined by stopwords. A response addresses an
//! item (gold TRUE) exactly when it contains all of the item's keywords;
//! otherwise it contains none of them or, as a distractor, a non-empty strict
//! subset. With `label_noise > 0` a fraction of gold labels is flipped after
//! the text is written, which breaks the planted rule on purpose.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusDocument, Question, RubricItem, RubricJudgment, StudentResponse};
use crate::points::Points;
use crate::seeding::rng_for;
use crate::text::is_stopword;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n_questions: usize,
    pub items_per_question: usize,
    pub responses_per_question: usize,
    pub keywords_per_item: usize,
    pub keyword_pool_size: usize,
    /// Probability that a FALSE item still gets a partial mention.
    pub distractor_rate: f64,
    /// Probability that a (response, item) pair is planted TRUE.
    pub true_rate: f64,
    /// Probability that a gold label is flipped after generation.
    pub label_noise: f64,
    pub points_min: i64,
    pub points_max: i64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_questions: 4,
            items_per_question: 7,
            responses_per_question: 50,
            keywords_per_item: 3,
            keyword_pool_size: 120,
            distractor_rate: 0.3,
            true_rate: 0.58,
            label_noise: 0.0,
            points_min: 1,
            points_max: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("{0} must be positive")]
    ZeroCount(&'static str),
    #[error("keyword pool of {available} cannot supply {needed} disjoint keywords")]
    KeywordPoolTooSmall { needed: usize, available: usize },
    #[error("{name} = {value} is outside [0, 1]")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("invalid points range [{min}, {max}]")]
    InvalidPointsRange { min: i64, max: i64 },
}

const SYLLABLES: [&str; 20] = [
    "ka", "lo", "mi", "ru", "te", "vo", "zi", "pa", "ne", "su", "do", "fe", "gu", "hi", "jo", "ba", "ri", "xu",
    "we", "ya",
];

const FILLER: &[&str] = &[
    "atom", "bond", "energy", "electron", "molecule", "reaction", "charge", "orbital", "shell", "nucleus",
    "density", "structure", "because", "increases", "decreases", "stronger", "weaker", "attraction",
    "repulsion", "model", "trend", "periodic", "table", "radius", "effective", "distance", "ion", "state",
    "heat", "system", "therefore", "results", "shows", "clearly", "overall", "value", "higher", "lower",
    "compared", "explains", "observed", "measured", "sample", "solution", "gas", "liquid", "solid", "pressure",
    "temperature", "volume", "level", "force", "field", "particle", "balance", "change", "rate",
];

/// Size of the invented keyword vocabulary.
pub const KEYWORD_VOCABULARY: usize = SYLLABLES.len() * SYLLABLES.len() * SYLLABLES.len();

fn keyword_pool(size: usize, seed: u64) -> Vec<String> {
    let mut all: Vec<String> = Vec::with_capacity(KEYWORD_VOCABULARY);
    for a in SYLLABLES {
        for b in SYLLABLES {
            for c in SYLLABLES {
                let w = format!("{a}{b}{c}");
                if !is_stopword(&w) && !FILLER.contains(&w.as_str()) {
                    all.push(w);
                }
            }
        }
    }
    all.shuffle(&mut rng_for(seed, "synth", "keywords"));
    all.truncate(size);
    all
}

fn check_rate(name: &'static str, value: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SynthError::InvalidRate { name, value })
    }
}

fn sentence(rng: &mut ChaCha8Rng, keywords: &[&str]) -> String {
    let n_filler = rng.random_range(3..=6);
    let mut words: Vec<&str> = keywords.to_vec();
    words.extend((0..n_filler).map(|_| *FILLER.choose(rng).expect("filler list is non-empty")));
    words.shuffle(rng);
    let mut s = words.join(" ");
    if let Some(first) = s.get(..1) {
        s.replace_range(..1, &first.to_uppercase());
    }
    s.push('.');
    s
}

fn item_text(keywords: &[String]) -> String {
    match keywords {
        [] => String::new(),
        [one] => format!("It is {one}."),
        [init @ .., last] => format!("It is {} and {last}.", init.join(", ")),
    }
}

pub fn generate_synthetic_corpus(params: &SynthParams, seed: u64) -> Result<Corpus, SynthError> {
    for (name, v) in [
        ("n_questions", params.n_questions),
        ("items_per_question", params.items_per_question),
        ("responses_per_question", params.responses_per_question),
        ("keywords_per_item", params.keywords_per_item),
        ("keyword_pool_size", params.keyword_pool_size),
    ] {
        if v == 0 {
            return Err(SynthError::ZeroCount(name));
        }
    }
    check_rate("distractor_rate", params.distractor_rate)?;
    check_rate("true_rate", params.true_rate)?;
    check_rate("label_noise", params.label_noise)?;
    if params.points_min < 0 || params.points_min > params.points_max {
        return Err(SynthError::InvalidPointsRange { min: params.points_min, max: params.points_max });
    }
    let needed = params.n_questions * params.items_per_question * params.keywords_per_item;
    let available = params.keyword_pool_size.min(KEYWORD_VOCABULARY);
    if needed > available {
        return Err(SynthError::KeywordPoolTooSmall { needed, available });
    }

    let pool = keyword_pool(available, seed);
    let mut pool_iter = pool.into_iter();
    let mut doc = CorpusDocument::default();
    let mut rng = rng_for(seed, "synth", "corpus");

    for qi in 1..=params.n_questions {
        let qid = format!("q{qi}");
        doc.questions.push(Question { id: qid.clone(), text: format!("Question {qi}: explain the underlying concepts.") });

        let mut item_keywords: Vec<Vec<String>> = Vec::new();
        for ii in 1..=params.items_per_question {
            let kws: Vec<String> = pool_iter.by_ref().take(params.keywords_per_item).collect();
            doc.rubric_items.push(RubricItem {
                id: format!("{qid}-i{ii}"),
                question_id: qid.clone(),
                text: item_text(&kws),
                points: Points::integer(rng.random_range(params.points_min..=params.points_max)),
            });
            item_keywords.push(kws);
        }

        for ri in 1..=params.responses_per_question {
            let rid = format!("{qid}-r{ri:03}");
            let mut sentences = Vec::new();
            let mut labels = Vec::new();
            for kws in &item_keywords {
                let planted = rng.random_bool(params.true_rate);
                if planted {
                    let all: Vec<&str> = kws.iter().map(String::as_str).collect();
                    sentences.push(sentence(&mut rng, &all));
                } else if kws.len() > 1 && rng.random_bool(params.distractor_rate) {
                    let k = rng.random_range(1..kws.len());
                    let subset: Vec<&str> = kws.choose_multiple(&mut rng, k).map(String::as_str).collect();
                    sentences.push(sentence(&mut rng, &subset));
                }
                let flipped = params.label_noise > 0.0 && rng.random_bool(params.label_noise);
                labels.push(planted ^ flipped);
            }
            for _ in 0..rng.random_range(1..=3) {
                sentences.push(sentence(&mut rng, &[]));
            }
            sentences.shuffle(&mut rng);
            doc.responses.push(StudentResponse { id: rid.clone(), question_id: qid.clone(), text: sentences.join(" ") });
            for (ii, label) in labels.into_iter().enumerate() {
                doc.judgments.push(RubricJudgment {
                    response_id: rid.clone(),
                    rubric_item_id: format!("{qid}-i{}", ii + 1),
                    label,
                });
            }
        }
    }

    Ok(Corpus::from_document(doc).expect("generator output satisfies corpus invariants"))
}
