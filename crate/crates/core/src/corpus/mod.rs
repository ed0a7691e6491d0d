//! The grading data model: questions, point-valued rubric items, student
//! responses and gold per-item judgments.
//!
//! A [`CorpusDocument`] is the raw serialized form. A [`Corpus`] is a
//! document that passed [`validate`]: every reference resolves, ids are
//! unique, and every (response, rubric item of the response's question)
//! pair carries exactly one gold judgment.

mod split;
mod synth;

pub use split::{
    holdout_question_split, largest_remainder, make_split, subsample_train, Partition, SplitAssignment,
    SplitEntry, SplitError, SplitProvenance,
};
pub use synth::{generate_synthetic_corpus, SynthError, SynthParams};

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::points::Points;
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Question {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RubricItem {
    pub id: String,
    pub question_id: String,
    pub text: String,
    pub points: Points,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentResponse {
    pub id: String,
    pub question_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RubricJudgment {
    pub response_id: String,
    pub rubric_item_id: String,
    pub label: bool,
}

/// Serialized corpus layout. Not necessarily valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusDocument {
    pub questions: Vec<Question>,
    pub rubric_items: Vec<RubricItem>,
    pub responses: Vec<StudentResponse>,
    pub judgments: Vec<RubricJudgment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    Question,
    RubricItem,
    Response,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Question => "question",
            EntityKind::RubricItem => "rubric item",
            EntityKind::Response => "response",
        })
    }
}

/// One broken corpus invariant. `Display` renders a single line naming the
/// offending ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId { kind: EntityKind, id: String },
    EmptyText { kind: EntityKind, id: String },
    NegativePoints { item_id: String, points: Points },
    DanglingReference { owner: String, kind: EntityKind, id: String },
    QuestionWithoutItems { question_id: String },
    CrossQuestion { response_id: String, rubric_item_id: String },
    DuplicateJudgment { response_id: String, rubric_item_id: String },
    MissingJudgment { response_id: String, rubric_item_id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { kind, id } => write!(f, "duplicate {kind} id {id:?}"),
            Violation::EmptyText { kind, id } => write!(f, "{kind} {id:?} has empty text"),
            Violation::NegativePoints { item_id, points } => {
                write!(f, "rubric item {item_id:?} has negative points {points}")
            }
            Violation::DanglingReference { owner, kind, id } => {
                write!(f, "{owner} references unknown {kind} {id:?}")
            }
            Violation::QuestionWithoutItems { question_id } => {
                write!(f, "question {question_id:?} has no rubric items")
            }
            Violation::CrossQuestion { response_id, rubric_item_id } => write!(
                f,
                "judgment ({response_id:?}, {rubric_item_id:?}) pairs a response with an item of a different question"
            ),
            Violation::DuplicateJudgment { response_id, rubric_item_id } => {
                write!(f, "duplicate judgment ({response_id:?}, {rubric_item_id:?})")
            }
            Violation::MissingJudgment { response_id, rubric_item_id } => {
                write!(f, "missing judgment ({response_id:?}, {rubric_item_id:?})")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse corpus {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid corpus ({} violation(s)): {}", .0.len(), join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(violations: &[Violation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Checks every corpus invariant and reports all violations in a stable order.
pub fn validate(doc: &CorpusDocument) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut question_ids = HashSet::new();
    for q in &doc.questions {
        if !question_ids.insert(q.id.as_str()) {
            out.push(Violation::DuplicateId { kind: EntityKind::Question, id: q.id.clone() });
        }
    }

    let mut item_question: HashMap<&str, &str> = HashMap::new();
    let mut questions_with_items = HashSet::new();
    for item in &doc.rubric_items {
        if item_question.insert(&item.id, &item.question_id).is_some() {
            out.push(Violation::DuplicateId { kind: EntityKind::RubricItem, id: item.id.clone() });
        }
        if !question_ids.contains(item.question_id.as_str()) {
            out.push(Violation::DanglingReference {
                owner: format!("rubric item {:?}", item.id),
                kind: EntityKind::Question,
                id: item.question_id.clone(),
            });
        }
        if item.text.trim().is_empty() {
            out.push(Violation::EmptyText { kind: EntityKind::RubricItem, id: item.id.clone() });
        }
        if item.points.is_negative() {
            out.push(Violation::NegativePoints { item_id: item.id.clone(), points: item.points });
        }
        questions_with_items.insert(item.question_id.as_str());
    }
    for q in &doc.questions {
        if !questions_with_items.contains(q.id.as_str()) {
            out.push(Violation::QuestionWithoutItems { question_id: q.id.clone() });
        }
    }

    let mut response_question: HashMap<&str, &str> = HashMap::new();
    for r in &doc.responses {
        if response_question.insert(&r.id, &r.question_id).is_some() {
            out.push(Violation::DuplicateId { kind: EntityKind::Response, id: r.id.clone() });
        }
        if !question_ids.contains(r.question_id.as_str()) {
            out.push(Violation::DanglingReference {
                owner: format!("response {:?}", r.id),
                kind: EntityKind::Question,
                id: r.question_id.clone(),
            });
        }
        if r.text.trim().is_empty() {
            out.push(Violation::EmptyText { kind: EntityKind::Response, id: r.id.clone() });
        }
    }

    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    for j in &doc.judgments {
        let owner = || format!("judgment ({:?}, {:?})", j.response_id, j.rubric_item_id);
        let rq = response_question.get(j.response_id.as_str());
        let iq = item_question.get(j.rubric_item_id.as_str());
        if rq.is_none() {
            out.push(Violation::DanglingReference {
                owner: owner(),
                kind: EntityKind::Response,
                id: j.response_id.clone(),
            });
        }
        if iq.is_none() {
            out.push(Violation::DanglingReference {
                owner: owner(),
                kind: EntityKind::RubricItem,
                id: j.rubric_item_id.clone(),
            });
        }
        if let (Some(rq), Some(iq)) = (rq, iq) {
            if rq != iq {
                out.push(Violation::CrossQuestion {
                    response_id: j.response_id.clone(),
                    rubric_item_id: j.rubric_item_id.clone(),
                });
            }
        }
        if !seen.insert((&j.response_id, &j.rubric_item_id)) {
            out.push(Violation::DuplicateJudgment {
                response_id: j.response_id.clone(),
                rubric_item_id: j.rubric_item_id.clone(),
            });
        }
    }

    for r in &doc.responses {
        for item in doc.rubric_items.iter().filter(|i| i.question_id == r.question_id) {
            if !seen.contains(&(r.id.as_str(), item.id.as_str())) {
                out.push(Violation::MissingJudgment {
                    response_id: r.id.clone(),
                    rubric_item_id: item.id.clone(),
                });
            }
        }
    }

    out
}

#[derive(Debug, Clone, Default)]
struct CorpusIndex {
    question_pos: HashMap<String, usize>,
    item_pos: HashMap<String, usize>,
    response_pos: HashMap<String, usize>,
    /// Item positions per question position, in document order.
    items_by_question: Vec<Vec<usize>>,
    responses_by_question: Vec<Vec<usize>>,
    gold: HashMap<(usize, usize), bool>,
}

/// A validated corpus. Immutable; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Corpus {
    doc: CorpusDocument,
    index: CorpusIndex,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

impl Corpus {
    pub fn from_document(doc: CorpusDocument) -> Result<Self, CorpusError> {
        let violations = validate(&doc);
        if !violations.is_empty() {
            return Err(CorpusError::Invalid(violations));
        }
        let question_pos: HashMap<_, _> =
            doc.questions.iter().enumerate().map(|(i, q)| (q.id.clone(), i)).collect();
        let item_pos: HashMap<_, _> = doc.rubric_items.iter().enumerate().map(|(i, x)| (x.id.clone(), i)).collect();
        let response_pos: HashMap<_, _> =
            doc.responses.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        let mut items_by_question = vec![Vec::new(); doc.questions.len()];
        for (i, item) in doc.rubric_items.iter().enumerate() {
            items_by_question[question_pos[&item.question_id]].push(i);
        }
        let mut responses_by_question = vec![Vec::new(); doc.questions.len()];
        for (i, r) in doc.responses.iter().enumerate() {
            responses_by_question[question_pos[&r.question_id]].push(i);
        }
        let gold = doc
            .judgments
            .iter()
            .map(|j| ((response_pos[&j.response_id], item_pos[&j.rubric_item_id]), j.label))
            .collect();
        let index = CorpusIndex {
            question_pos,
            item_pos,
            response_pos,
            items_by_question,
            responses_by_question,
            gold,
        };
        Ok(Corpus { doc, index })
    }

    pub fn document(&self) -> &CorpusDocument {
        &self.doc
    }

    pub fn into_document(self) -> CorpusDocument {
        self.doc
    }

    pub fn questions(&self) -> &[Question] {
        &self.doc.questions
    }

    pub fn rubric_items(&self) -> &[RubricItem] {
        &self.doc.rubric_items
    }

    pub fn responses(&self) -> &[StudentResponse] {
        &self.doc.responses
    }

    pub fn judgments(&self) -> &[RubricJudgment] {
        &self.doc.judgments
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.index.question_pos.get(id).map(|&i| &self.doc.questions[i])
    }

    pub fn rubric_item(&self, id: &str) -> Option<&RubricItem> {
        self.index.item_pos.get(id).map(|&i| &self.doc.rubric_items[i])
    }

    pub fn response(&self, id: &str) -> Option<&StudentResponse> {
        self.index.response_pos.get(id).map(|&i| &self.doc.responses[i])
    }

    /// Rubric items of a question, in document order.
    pub fn items_for(&self, question_id: &str) -> impl Iterator<Item = &RubricItem> + '_ {
        self.index
            .question_pos
            .get(question_id)
            .into_iter()
            .flat_map(move |&q| self.index.items_by_question[q].iter().map(move |&i| &self.doc.rubric_items[i]))
    }

    /// Responses to a question, in document order.
    pub fn responses_for(&self, question_id: &str) -> impl Iterator<Item = &StudentResponse> + '_ {
        self.index
            .question_pos
            .get(question_id)
            .into_iter()
            .flat_map(move |&q| self.index.responses_by_question[q].iter().map(move |&i| &self.doc.responses[i]))
    }

    pub fn gold(&self, response_id: &str, rubric_item_id: &str) -> Option<bool> {
        let r = *self.index.response_pos.get(response_id)?;
        let i = *self.index.item_pos.get(rubric_item_id)?;
        self.index.gold.get(&(r, i)).copied()
    }

    /// Reference grade of a response: sum of points of gold-TRUE items.
    pub fn gold_points(&self, response_id: &str) -> Option<Points> {
        let response = self.response(response_id)?;
        Some(
            self.items_for(&response.question_id)
                .filter(|item| self.gold(response_id, &item.id) == Some(true))
                .map(|item| item.points)
                .sum(),
        )
    }

    pub fn max_points(&self, question_id: &str) -> Points {
        self.items_for(question_id).map(|i| i.points).sum()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("corpus serialization is infallible")
    }

    /// SHA-256 of the compact serialized document, hex encoded.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.doc).expect("corpus serialization is infallible");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub fn parse_corpus(text: &str, path: &Path) -> Result<Corpus, CorpusError> {
    let doc: CorpusDocument = serde_json::from_str(text).map_err(|e| CorpusError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Corpus::from_document(doc)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    parse_corpus(&text, path)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut text = corpus.to_json_pretty();
    text.push('\n');
    fs::write(path, text).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_questions: usize,
    pub n_items: usize,
    pub n_responses: usize,
    pub n_judgments: usize,
    pub n_true: usize,
    pub n_false: usize,
    pub mean_response_words: f64,
}

pub fn corpus_stats(corpus: &Corpus) -> StatsReport {
    let n_true = corpus.judgments().iter().filter(|j| j.label).count();
    let n_judgments = corpus.judgments().len();
    let total_words: usize = corpus.responses().iter().map(|r| text::word_count(&r.text)).sum();
    let mean_response_words = if corpus.responses().is_empty() {
        0.0
    } else {
        total_words as f64 / corpus.responses().len() as f64
    };
    StatsReport {
        n_questions: corpus.questions().len(),
        n_items: corpus.rubric_items().len(),
        n_responses: corpus.responses().len(),
        n_judgments,
        n_true,
        n_false: n_judgments - n_true,
        mean_response_words,
    }
}
