use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Binary confusion matrix; the positive class is TRUE (entailed).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_labels(gold: &[bool], predicted: &[bool]) -> Result<Self, MetricsError> {
        check_lengths(gold.len(), predicted.len())?;
        let mut c = ConfusionCounts::default();
        for (&g, &p) in gold.iter().zip(predicted) {
            match (g, p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("label vectors differ in length ({gold} gold, {predicted} predicted)")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("no labels to evaluate")]
    Empty,
    #[error("no runs to aggregate")]
    NoRuns,
}

fn check_lengths(gold: usize, predicted: usize) -> Result<(), MetricsError> {
    if gold != predicted {
        return Err(MetricsError::LengthMismatch { gold, predicted });
    }
    if gold == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// `num / den` as one correctly rounded division, 0 when `den` is 0.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

impl MetricsReport {
    /// Each metric is a single integer division. F1 uses
    /// `2tp / (2tp + fp + fn)`, which equals the harmonic mean of precision
    /// and recall exactly and is 0 precisely when `tp` is 0.
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let ConfusionCounts { tp, fp, fn_, tn } = counts;
        MetricsReport {
            accuracy: ratio(tp + tn, counts.total()),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            counts,
        }
    }
}

pub fn compute_metrics(gold: &[bool], predicted: &[bool]) -> Result<MetricsReport, MetricsError> {
    Ok(MetricsReport::from_counts(ConfusionCounts::from_labels(gold, predicted)?))
}

/// Accuracy and macro-averaged precision, recall and F1 over score classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Classes averaged over: every value seen in gold or predicted.
    pub classes: Vec<i64>,
}

pub fn compute_multiclass(gold: &[i64], predicted: &[i64]) -> Result<MulticlassReport, MetricsError> {
    check_lengths(gold.len(), predicted.len())?;
    let mut per_class: BTreeMap<i64, ConfusionCounts> = BTreeMap::new();
    let mut correct = 0u64;
    for (&g, &p) in gold.iter().zip(predicted) {
        if g == p {
            correct += 1;
            per_class.entry(g).or_default().tp += 1;
        } else {
            per_class.entry(g).or_default().fn_ += 1;
            per_class.entry(p).or_default().fp += 1;
        }
    }
    let k = per_class.len() as f64;
    let (mut precision, mut recall, mut f1) = (0.0, 0.0, 0.0);
    for c in per_class.values() {
        let m = MetricsReport::from_counts(*c);
        precision += m.precision;
        recall += m.recall;
        f1 += m.f1;
    }
    Ok(MulticlassReport {
        accuracy: ratio(correct, gold.len() as u64),
        precision: precision / k,
        recall: recall / k,
        f1: f1 / k,
        classes: per_class.into_keys().collect(),
    })
}

/// The four headline metrics in report order.
pub trait MetricValues {
    fn values(&self) -> [f64; 4];
}

impl MetricValues for MetricsReport {
    fn values(&self) -> [f64; 4] {
        [self.accuracy, self.precision, self.recall, self.f1]
    }
}

impl MetricValues for MulticlassReport {
    fn values(&self) -> [f64; 4] {
        [self.accuracy, self.precision, self.recall, self.f1]
    }
}

impl MetricValues for [f64; 4] {
    fn values(&self) -> [f64; 4] {
        *self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator), 0 for a single run.
    pub std: f64,
}

/// Order-independent mean and sample standard deviation: values are
/// sorted before any summation.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (first, last) = (*v.first()?, *v.last()?);
    if first == last {
        return Some(Summary { mean: first, std: 0.0 });
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    Some(Summary { mean, std: (ss / (n - 1.0)).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_seeds: usize,
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
}

impl RunSummary {
    pub fn metrics(&self) -> [Summary; 4] {
        [self.accuracy, self.precision, self.recall, self.f1]
    }
}

pub fn aggregate_seeds<M: MetricValues>(reports: &[M]) -> Result<RunSummary, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::NoRuns);
    }
    let column = |k: usize| {
        let values: Vec<f64> = reports.iter().map(|r| r.values()[k]).collect();
        summarize(&values).expect("non-empty")
    };
    Ok(RunSummary {
        n_seeds: reports.len(),
        accuracy: column(0),
        precision: column(1),
        recall: column(2),
        f1: column(3),
    })
}
