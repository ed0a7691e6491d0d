//! Point totals and rubric-aligned feedback from per-item verdicts.
//!
//! Credit is all-or-nothing per rubric item and totals are exact rationals.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, RubricItem, StudentResponse};
use crate::entailment::{group_by_response, Prediction};
use crate::points::Points;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub rubric_item_id: String,
    pub label: bool,
    pub points: Points,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResponse {
    pub response_id: String,
    pub question_id: String,
    pub earned: Points,
    pub max: Points,
    pub items: Vec<ItemOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoringError {
    #[error("response {response_id}: no prediction for rubric item {rubric_item_id}")]
    Missing { response_id: String, rubric_item_id: String },
    #[error("response {response_id}: more than one prediction for rubric item {rubric_item_id}")]
    Duplicate { response_id: String, rubric_item_id: String },
    #[error("response {response_id}: prediction for rubric item {rubric_item_id}, which is not an item of question {question_id}")]
    ForeignItem { response_id: String, rubric_item_id: String, question_id: String },
    #[error("response {response_id}: prediction belongs to response {other}")]
    WrongResponse { response_id: String, other: String },
    #[error("rubric items span questions {0} and {1}")]
    MixedQuestions(String, String),
    #[error("response {response_id}: question has no rubric items")]
    NoItems { response_id: String },
    #[error("predictions reference unknown response {0}")]
    UnknownResponse(String),
}

/// Totals one response. `items` are the rubric items of its question and
/// `predictions` must cover each exactly once.
pub fn score_response(
    response_id: &str,
    items: &[&RubricItem],
    predictions: &[&Prediction],
) -> Result<ScoredResponse, ScoringError> {
    let first = items.first().ok_or_else(|| ScoringError::NoItems { response_id: response_id.to_string() })?;
    if let Some(other) = items.iter().find(|i| i.question_id != first.question_id) {
        return Err(ScoringError::MixedQuestions(first.question_id.clone(), other.question_id.clone()));
    }
    let known: HashSet<&str> = items.iter().map(|i| i.id.as_str()).collect();
    let mut by_item: HashMap<&str, &Prediction> = HashMap::new();
    for p in predictions {
        if p.response_id != response_id {
            return Err(ScoringError::WrongResponse { response_id: response_id.to_string(), other: p.response_id.clone() });
        }
        if !known.contains(p.rubric_item_id.as_str()) {
            return Err(ScoringError::ForeignItem {
                response_id: response_id.to_string(),
                rubric_item_id: p.rubric_item_id.clone(),
                question_id: first.question_id.clone(),
            });
        }
        if by_item.insert(&p.rubric_item_id, p).is_some() {
            return Err(ScoringError::Duplicate {
                response_id: response_id.to_string(),
                rubric_item_id: p.rubric_item_id.clone(),
            });
        }
    }
    let mut outcomes = Vec::with_capacity(items.len());
    for item in items {
        let p = by_item.get(item.id.as_str()).ok_or_else(|| ScoringError::Missing {
            response_id: response_id.to_string(),
            rubric_item_id: item.id.clone(),
        })?;
        outcomes.push(ItemOutcome { rubric_item_id: item.id.clone(), label: p.label, points: item.points, score: p.score });
    }
    Ok(ScoredResponse {
        response_id: response_id.to_string(),
        question_id: first.question_id.clone(),
        earned: outcomes.iter().filter(|o| o.label).map(|o| o.points).sum(),
        max: items.iter().map(|i| i.points).sum(),
        items: outcomes,
    })
}

/// Scores every response of the corpus, in corpus order.
pub fn score_corpus(corpus: &Corpus, predictions: &[Prediction]) -> Result<Vec<ScoredResponse>, ScoringError> {
    let grouped = group_by_response(predictions);
    if let Some(unknown) = grouped.keys().filter(|id| corpus.response(id).is_none()).min() {
        return Err(ScoringError::UnknownResponse(unknown.to_string()));
    }
    corpus
        .responses()
        .iter()
        .map(|r| {
            let items: Vec<&RubricItem> = corpus.items_for(&r.question_id).collect();
            let preds = grouped.get(r.id.as_str()).map(Vec::as_slice).unwrap_or_default();
            score_response(&r.id, &items, preds)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScoredItemRecord<'a> {
    id: &'a str,
    label: bool,
    points: Points,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ScoredRecord<'a> {
    response_id: &'a str,
    earned: Points,
    max: Points,
    items: Vec<ScoredItemRecord<'a>>,
}

/// One `{response_id, earned, max, items:[{id, label, points}]}` line per response.
pub fn scored_jsonl(scored: &[ScoredResponse]) -> String {
    let mut out = String::new();
    for s in scored {
        let record = ScoredRecord {
            response_id: &s.response_id,
            earned: s.earned,
            max: s.max,
            items: s
                .items
                .iter()
                .map(|o| ScoredItemRecord { id: &o.rubric_item_id, label: o.label, points: o.points })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("scored records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_scored(path: &Path, scored: &[ScoredResponse]) -> std::io::Result<()> {
    fs::File::create(path)?.write_all(scored_jsonl(scored).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub response_id: String,
    pub question_id: String,
    pub met: Vec<String>,
    pub unmet: Vec<String>,
    pub earned: Points,
    pub max: Points,
}

pub fn feedback_report(
    response: &StudentResponse,
    items: &[&RubricItem],
    predictions: &[&Prediction],
) -> Result<FeedbackReport, ScoringError> {
    let scored = score_response(&response.id, items, predictions)?;
    let (mut met, mut unmet) = (Vec::new(), Vec::new());
    for (item, outcome) in items.iter().zip(&scored.items) {
        if outcome.label { &mut met } else { &mut unmet }.push(item.text.clone());
    }
    Ok(FeedbackReport {
        response_id: scored.response_id,
        question_id: scored.question_id,
        met,
        unmet,
        earned: scored.earned,
        max: scored.max,
    })
}

impl FeedbackReport {
    pub fn render_markdown(&self) -> String {
        let mut out = format!("### Response {} ({})\n\nScore: {} / {}\n", self.response_id, self.question_id, self.earned, self.max);
        for (title, items) in [("Addressed", &self.met), ("Not addressed", &self.unmet)] {
            write!(out, "\n**{title}**\n\n").unwrap();
            if items.is_empty() {
                out.push_str("- (none)\n");
            }
            for text in items {
                writeln!(out, "- {text}").unwrap();
            }
        }
        out
    }

    pub fn render_plain(&self) -> String {
        let mut out = format!("Response {} ({}): {} / {}\n", self.response_id, self.question_id, self.earned, self.max);
        for text in &self.met {
            writeln!(out, "  [x] {text}").unwrap();
        }
        for text in &self.unmet {
            writeln!(out, "  [ ] {text}").unwrap();
        }
        out
    }
}

/// Feedback for every response, in corpus order.
pub fn feedback_for_corpus(corpus: &Corpus, predictions: &[Prediction]) -> Result<Vec<FeedbackReport>, ScoringError> {
    let grouped = group_by_response(predictions);
    corpus
        .responses()
        .iter()
        .map(|r| {
            let items: Vec<&RubricItem> = corpus.items_for(&r.question_id).collect();
            let preds = grouped.get(r.id.as_str()).map(Vec::as_slice).unwrap_or_default();
            feedback_report(r, &items, preds)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, points: i64) -> RubricItem {
        RubricItem { id: id.into(), question_id: "q".into(), text: format!("text of {id}"), points: Points::integer(points) }
    }

    fn pred(item: &str, label: bool) -> Prediction {
        Prediction { response_id: "r".into(), rubric_item_id: item.into(), label, score: if label { 1.0 } else { -1.0 } }
    }

    fn run(points: &[i64], labels: &[bool]) -> Result<ScoredResponse, ScoringError> {
        let items: Vec<RubricItem> = points.iter().enumerate().map(|(k, &p)| item(&format!("i{k}"), p)).collect();
        let preds: Vec<Prediction> = labels.iter().enumerate().map(|(k, &l)| pred(&format!("i{k}"), l)).collect();
        score_response("r", &items.iter().collect::<Vec<_>>(), &preds.iter().collect::<Vec<_>>())
    }

    #[test]
    fn totals() {
        let s = run(&[2, 3, 3], &[true, false, true]).unwrap();
        assert_eq!((s.earned, s.max), (Points::integer(5), Points::integer(8)));
        assert_eq!(run(&[2, 3, 3], &[false; 3]).unwrap().earned, Points::ZERO);
        let all = run(&[2, 3, 3], &[true; 3]).unwrap();
        assert_eq!(all.earned, all.max);
        assert_eq!(run(&[3, 3, 2], &[true, true, false]).unwrap().earned, Points::integer(6));
    }

    #[test]
    fn coverage_errors() {
        let items = [item("a", 1), item("b", 1)];
        let refs: Vec<&RubricItem> = items.iter().collect();
        let (a, b, c) = (pred("a", true), pred("b", true), pred("c", true));
        assert!(matches!(score_response("r", &refs, &[&a]), Err(ScoringError::Missing { .. })));
        assert!(matches!(score_response("r", &refs, &[&a, &a, &b]), Err(ScoringError::Duplicate { .. })));
        assert!(matches!(score_response("r", &refs, &[&a, &b, &c]), Err(ScoringError::ForeignItem { .. })));
    }

    #[test]
    fn feedback_partition() {
        let items = [item("a", 1), item("b", 2)];
        let refs: Vec<&RubricItem> = items.iter().collect();
        let response = StudentResponse { id: "r".into(), question_id: "q".into(), text: "x".into() };
        let (a, b) = (pred("a", true), pred("b", false));
        let f = feedback_report(&response, &refs, &[&b, &a]).unwrap();
        assert_eq!(f.met, vec!["text of a"]);
        assert_eq!(f.unmet, vec!["text of b"]);
        let b = pred("b", true);
        assert!(feedback_report(&response, &refs, &[&a, &b]).unwrap().unmet.is_empty());
    }

    #[test]
    fn scored_record_shape() {
        let s = run(&[2, 3], &[true, false]).unwrap();
        assert_eq!(
            scored_jsonl(&[s]),
            "{\"response_id\":\"r\",\"earned\":2,\"max\":5,\"items\":[{\"id\":\"i0\",\"label\":true,\"points\":2},{\"id\":\"i1\",\"label\":false,\"points\":3}]}\n"
        );
    }
}
