//! Report rendering. Output bytes depend only on the input value.
//!
//! Tables follow the usual layout for these results: accuracy as a
//! percentage with one decimal, precision/recall/F1 in [0, 1] with three,
//! and "mean (std)" cells when more than one seed was run.

use std::fmt::Write as _;

use super::{Comparison, Protocol, ProtocolResult, Provenance, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, ReportError> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("unknown report format {0:?} (expected csv, json or markdown)")]
    UnknownFormat(String),
    #[error("nothing to report: the result has no rows")]
    Empty,
    #[error("curve data is only defined for fraction sweeps, not {0}")]
    NotACurve(Protocol),
}

/// `84.1 (0.9)` for mean 0.841, std 0.009.
pub fn percent_cell(s: Summary, with_std: bool) -> String {
    if with_std {
        format!("{:.1} ({:.1})", s.mean * 100.0, s.std * 100.0)
    } else {
        format!("{:.1}", s.mean * 100.0)
    }
}

/// `0.864 (0.008)`.
pub fn unit_cell(s: Summary, with_std: bool) -> String {
    if with_std {
        format!("{:.3} ({:.3})", s.mean, s.std)
    } else {
        format!("{:.3}", s.mean)
    }
}

const METRICS: [&str; 4] = ["accuracy", "precision", "recall", "f1"];

pub fn emit_report(result: &ProtocolResult, format: ReportFormat) -> Result<String, ReportError> {
    if result.rows.is_empty() {
        return Err(ReportError::Empty);
    }
    Ok(match format {
        ReportFormat::Json => json(result),
        ReportFormat::Csv => csv_table(result),
        ReportFormat::Markdown => markdown(result),
    })
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn config_line(p: &Provenance) -> String {
    serde_json::to_string(&p.config).expect("config echo serializes")
}

fn seeds_line(seeds: &[u64], sep: &str) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(sep)
}

fn csv_header(out: &mut String, protocol: &str, p: &Provenance) {
    writeln!(out, "# protocol: {protocol}").unwrap();
    writeln!(out, "# corpus_sha256: {}", p.corpus_sha256).unwrap();
    writeln!(out, "# seeds: {}", seeds_line(&p.seeds, " ")).unwrap();
    writeln!(out, "# config: {}", config_line(p)).unwrap();
}

fn csv_records(records: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(&r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

fn csv_table(result: &ProtocolResult) -> String {
    let mut out = String::new();
    csv_header(&mut out, &result.protocol.to_string(), &result.provenance);
    let mut header = vec!["model".to_string(), "condition".into(), "n_seeds".into()];
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    let mut records = vec![header];
    for row in &result.rows {
        let mut r = vec![row.model.clone(), row.condition.clone().unwrap_or_default(), row.summary.n_seeds.to_string()];
        for s in row.summary.metrics() {
            r.push(s.mean.to_string());
            r.push(s.std.to_string());
        }
        records.push(r);
    }
    out.push_str(&csv_records(records));
    out
}

fn markdown_header(out: &mut String, title: &str, p: &Provenance) {
    writeln!(out, "## {title}\n").unwrap();
    writeln!(out, "- corpus sha256: `{}`", p.corpus_sha256).unwrap();
    writeln!(out, "- seeds: {}", seeds_line(&p.seeds, ", ")).unwrap();
    writeln!(out, "- config: `{}`\n", config_line(p)).unwrap();
}

fn table_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn markdown(result: &ProtocolResult) -> String {
    let mut out = String::new();
    markdown_header(&mut out, result.protocol.title(), &result.provenance);
    let condition = result.protocol.condition_label();
    let mut header = vec!["Model".to_string()];
    header.extend(condition.map(str::to_string));
    header.extend(["Accuracy", "Precision", "Recall", "F1"].map(String::from));
    out.push_str(&table_row(&header));
    out.push_str(&table_row(&vec!["---".to_string(); header.len()]));
    for row in &result.rows {
        let with_std = row.summary.n_seeds > 1;
        let mut cells = vec![row.model.clone()];
        if condition.is_some() {
            cells.push(row.condition.clone().unwrap_or_default());
        }
        let [acc, p, r, f1] = row.summary.metrics();
        cells.push(percent_cell(acc, with_std));
        cells.extend([p, r, f1].map(|s| unit_cell(s, with_std)));
        out.push_str(&table_row(&cells));
    }
    out
}

/// `fraction,metric,mean,std` rows for accuracy and F1, behind the
/// provenance comment lines.
pub fn emit_curve(result: &ProtocolResult) -> Result<String, ReportError> {
    if result.protocol != Protocol::FractionSweep {
        return Err(ReportError::NotACurve(result.protocol));
    }
    if result.rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut out = String::new();
    csv_header(&mut out, "fraction-sweep curve", &result.provenance);
    let mut records = vec![["fraction", "metric", "mean", "std"].map(String::from).to_vec()];
    for row in &result.rows {
        let fraction = row.condition.clone().unwrap_or_default();
        for (metric, s) in [("accuracy", row.summary.accuracy), ("f1", row.summary.f1)] {
            records.push(vec![fraction.clone(), metric.to_string(), s.mean.to_string(), s.std.to_string()]);
        }
    }
    out.push_str(&csv_records(records));
    Ok(out)
}

fn signed(delta: f64, scale: f64, decimals: usize) -> String {
    // Avoid "-0.0" for deltas that are zero after rounding.
    let v = delta * scale;
    let text = format!("{v:+.decimals$}");
    if text[1..].chars().all(|c| c == '0' || c == '.') {
        format!("+{}", &text[1..])
    } else {
        text
    }
}

fn bold_larger(a: f64, b: f64, render: impl Fn(f64) -> String) -> (String, String) {
    let (ra, rb) = (render(a), render(b));
    match a.partial_cmp(&b) {
        Some(std::cmp::Ordering::Greater) => (format!("**{ra}**"), rb),
        Some(std::cmp::Ordering::Less) => (ra, format!("**{rb}**")),
        _ => (ra, rb),
    }
}

pub fn emit_comparison(cmp: &Comparison, format: ReportFormat) -> Result<String, ReportError> {
    if cmp.rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let provenance = Provenance {
        corpus_sha256: cmp.corpus_sha256.clone(),
        seeds: cmp.seeds.clone(),
        config: serde_json::json!({ "pairs": cmp.rows.iter().map(|r| [&r.rubric_model, &r.score_model]).collect::<Vec<_>>() }),
    };
    Ok(match format {
        ReportFormat::Json => json(cmp),
        ReportFormat::Csv => {
            let mut out = String::new();
            csv_header(&mut out, "formulation-comparison", &provenance);
            let mut records = vec![[
                "rubric_model",
                "score_model",
                "rubric_accuracy",
                "score_accuracy",
                "delta_accuracy",
                "rubric_f1",
                "score_f1",
                "delta_f1",
            ]
            .map(String::from)
            .to_vec()];
            for r in &cmp.rows {
                records.push(vec![
                    r.rubric_model.clone(),
                    r.score_model.clone(),
                    r.rubric_accuracy.to_string(),
                    r.score_accuracy.to_string(),
                    r.delta_accuracy.to_string(),
                    r.rubric_f1.to_string(),
                    r.score_f1.to_string(),
                    r.delta_f1.to_string(),
                ]);
            }
            out.push_str(&csv_records(records));
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            markdown_header(&mut out, "Rubric vs score formulation", &provenance);
            let header = ["Rubric model", "Score model", "Rubric acc.", "Score acc.", "Δ acc.", "Rubric F1", "Score F1", "Δ F1"]
                .map(String::from);
            out.push_str(&table_row(&header));
            out.push_str(&table_row(&vec!["---".to_string(); header.len()]));
            for r in &cmp.rows {
                let (ra, sa) = bold_larger(r.rubric_accuracy, r.score_accuracy, |v| format!("{:.1}", v * 100.0));
                let (rf, sf) = bold_larger(r.rubric_f1, r.score_f1, |v| format!("{v:.3}"));
                out.push_str(&table_row(&[
                    r.rubric_model.clone(),
                    r.score_model.clone(),
                    ra,
                    sa,
                    signed(r.delta_accuracy, 100.0, 1),
                    rf,
                    sf,
                    signed(r.delta_f1, 1.0, 3),
                ]));
            }
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{ComparisonRow, ResultRow, RunSummary};

    fn s(mean: f64, std: f64) -> Summary {
        Summary { mean, std }
    }

    #[test]
    fn table_cell_formats() {
        assert_eq!(percent_cell(s(0.841, 0.009), true), "84.1 (0.9)");
        assert_eq!(percent_cell(s(1.0, 0.0), true), "100.0 (0.0)");
        assert_eq!(percent_cell(s(0.659, 0.0), false), "65.9");
        assert_eq!(unit_cell(s(0.864, 0.008), true), "0.864 (0.008)");
        assert_eq!(unit_cell(s(0.705, 0.0), false), "0.705");
    }

    #[test]
    fn delta_signs() {
        assert_eq!(signed(0.092, 100.0, 1), "+9.2");
        assert_eq!(signed(-0.13, 100.0, 1), "-13.0");
        assert_eq!(signed(-0.00001, 100.0, 1), "+0.0");
        assert_eq!(signed(0.154, 1.0, 3), "+0.154");
    }

    #[test]
    fn unknown_format_and_empty_rows() {
        assert_eq!("xml".parse::<ReportFormat>(), Err(ReportError::UnknownFormat("xml".into())));
        let empty = ProtocolResult {
            protocol: Protocol::Benchmark,
            provenance: Provenance { corpus_sha256: "x".into(), seeds: vec![1], config: serde_json::Value::Null },
            rows: vec![],
        };
        assert_eq!(emit_report(&empty, ReportFormat::Markdown), Err(ReportError::Empty));
    }

    #[test]
    fn coldstart_row_renders_like_the_reference_table() {
        let result = ProtocolResult {
            protocol: Protocol::Coldstart,
            provenance: Provenance { corpus_sha256: "abc".into(), seeds: vec![0], config: serde_json::json!({}) },
            rows: vec![ResultRow {
                model: "m".into(),
                condition: Some("Q1".into()),
                summary: RunSummary {
                    n_seeds: 1,
                    accuracy: s(0.659, 0.0),
                    precision: s(0.703, 0.0),
                    recall: s(0.717, 0.0),
                    f1: s(0.705, 0.0),
                },
                runs: vec![],
            }],
        };
        let md = emit_report(&result, ReportFormat::Markdown).unwrap();
        assert!(md.ends_with("| Model | Unseen | Accuracy | Precision | Recall | F1 |\n| --- | --- | --- | --- | --- | --- |\n| m | Q1 | 65.9 | 0.703 | 0.717 | 0.705 |\n"), "{md}");
    }

    #[test]
    fn comparison_marks_larger_value() {
        let cmp = Comparison {
            corpus_sha256: "h".into(),
            seeds: vec![1],
            rows: vec![ComparisonRow {
                rubric_model: "r".into(),
                score_model: "s".into(),
                rubric_accuracy: 0.83,
                score_accuracy: 0.70,
                delta_accuracy: 0.83 - 0.70,
                rubric_f1: 0.8,
                score_f1: 0.8,
                delta_f1: 0.0,
            }],
        };
        let md = emit_comparison(&cmp, ReportFormat::Markdown).unwrap();
        assert!(md.contains("| r | s | **83.0** | 70.0 | +13.0 | 0.800 | 0.800 | +0.000 |"), "{md}");
    }
}
