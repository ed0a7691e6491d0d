use std::fs;
use std::path::{Path, PathBuf};

use rubricnli::corpus::{
    self, corpus_stats, generate_synthetic_corpus, holdout_question_split, load_corpus, make_split, save_corpus,
    subsample_train, Corpus, CorpusDocument, Partition, SplitAssignment,
};
use rubricnli::entailment::{
    build_pairs_with, fit, predict_batched, read_predictions, write_predictions, Backend, EntailmentBackend,
    PairOptions, Prediction, SavedModel,
};
use rubricnli::evaluation::{
    compare_formulations, emit_comparison, emit_curve, emit_report, ConstantScorer, GoldScorer, Harness,
    NearestNeighborScorer, ProtocolResult, ReportFormat, ScorePredictor,
};
use rubricnli::points::{format_rational, parse_rational};
use rubricnli::scoring::{feedback_for_corpus, score_corpus, write_scored};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::config::{Formulation, Settings};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::write(&path, e))?;
    Ok(path)
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("cannot parse {what} {}: {e}", path.display())))
}

fn load(settings: &Settings, positional: Option<&Path>) -> Result<Corpus> {
    Ok(load_corpus(settings.corpus_path(positional)?)?)
}

/// Prints every violation on its own line. Exit 0 iff there are none.
pub fn validate(settings: &Settings, path: Option<&Path>) -> Result<()> {
    let path = settings.corpus_path(path)?;
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let doc: CorpusDocument = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("cannot parse corpus {}: {e}", path.display())))?;
    let violations = corpus::validate(&doc);
    if violations.is_empty() {
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(CliError::Data(format!("corpus {} has {} violation(s)", path.display(), violations.len())))
}

pub fn stats(settings: &Settings) -> Result<()> {
    let corpus = load(settings, None)?;
    let report = json!({ "corpus_sha256": corpus.content_hash(), "stats": corpus_stats(&corpus) });
    let text = pretty(&report);
    write_out(&settings.out, "stats.json", &text)?;
    print!("{text}");
    Ok(())
}

pub fn split(settings: &Settings, holdout: Option<&str>, subsample: Option<&str>) -> Result<()> {
    let corpus = load(settings, None)?;
    let mut split = match holdout {
        Some(q) => holdout_question_split(&corpus, q, settings.protocol.val_fraction, settings.seed)?,
        None => make_split(&corpus, settings.split_fractions(), settings.seed)?,
    };
    if let Some(f) = subsample {
        let fraction = parse_rational(f).map_err(|e| CliError::Config(format!("--subsample {f:?}: {e}")))?;
        split = subsample_train(&split, &corpus, fraction, settings.seed)?;
    }
    let path = write_out(&settings.out, "split.json", &(split.to_json_pretty() + "\n"))?;
    println!("{}", path.display());
    for p in [Partition::Train, Partition::Val, Partition::Test] {
        println!("{p}\t{}", split.count(p));
    }
    Ok(())
}

pub fn synth(settings: &Settings) -> Result<()> {
    let corpus = generate_synthetic_corpus(&settings.synth, settings.seed)?;
    fs::create_dir_all(&settings.out).map_err(|e| CliError::write(&settings.out, e))?;
    let path = settings.out.join("corpus.json");
    save_corpus(&corpus, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn pair_options(settings: &Settings) -> PairOptions {
    PairOptions { prepend_question: settings.backend.prepend_question }
}

pub fn train(settings: &Settings) -> Result<()> {
    let corpus = load(settings, None)?;
    let split = make_split(&corpus, settings.split_fractions(), settings.seed)?;
    let pairs = |p| build_pairs_with(&corpus, Some((&split, p)), pair_options(settings));
    let harness = Harness::default();
    let runtime = match harness.registry.instantiate(&settings.backend)? {
        Backend::Trainable(runtime) => runtime,
        Backend::Ready(_) => {
            return Err(CliError::Config(format!("backend {} is not trainable", settings.backend.kind)));
        }
    };
    let (model, log) = fit(runtime, &pairs(Partition::Train), &pairs(Partition::Val), &settings.backend)?;
    write_out(&settings.out, "split.json", &(split.to_json_pretty() + "\n"))?;
    let path = write_out(&settings.out, "model.json", &pretty(&model.save()))?;
    let record = json!({
        "corpus_sha256": corpus.content_hash(),
        "seeds": [settings.seed],
        "config": { "backend": settings.backend, "split": settings.protocol.split.iter().map(format_rational).collect::<Vec<_>>() },
        "training_log": log,
    });
    write_out(&settings.out, "training_log.json", &pretty(&record))?;
    println!("{}", path.display());
    println!("selected epoch {}", log.selected_epoch);
    Ok(())
}

/// The backend to predict with: a saved model if given, else the configured
/// backend, which must not need training.
fn ready_backend(settings: &Settings, harness: &Harness, model: Option<&Path>) -> Result<Box<dyn EntailmentBackend>> {
    if let Some(path) = model {
        let saved: SavedModel = read_json(path, "model")?;
        return Ok(Box::new(harness.registry.load(&saved)?));
    }
    match harness.registry.instantiate(&settings.backend)? {
        Backend::Ready(b) => Ok(b),
        Backend::Trainable(_) => Err(CliError::Config(
            "a trainable backend must be trained first; pass --model with the output of `train`".into(),
        )),
    }
}

fn predict_pairs(
    settings: &Settings,
    corpus: &Corpus,
    model: Option<&Path>,
    subset: Option<(&SplitAssignment, Partition)>,
) -> Result<Vec<Prediction>> {
    let harness = Harness::default();
    let backend = ready_backend(settings, &harness, model)?;
    let pairs = build_pairs_with(corpus, subset, pair_options(settings));
    Ok(predict_batched(backend.as_ref(), &pairs, harness.exec, harness.batch)?)
}

pub fn predict(settings: &Settings, model: Option<&Path>, split: Option<&Path>, partition: Option<&str>) -> Result<()> {
    let corpus = load(settings, None)?;
    let split: Option<SplitAssignment> = split.map(|p| read_json(p, "split")).transpose()?;
    let partition: Option<Partition> = partition
        .map(|p| p.parse().map_err(|e| CliError::Config(format!("--partition: {e}"))))
        .transpose()?;
    let subset = match (&split, partition) {
        (Some(s), Some(p)) => Some((s, p)),
        (None, None) => None,
        _ => return Err(CliError::Config("--split and --partition must be given together".into())),
    };
    let predictions = predict_pairs(settings, &corpus, model, subset)?;
    fs::create_dir_all(&settings.out).map_err(|e| CliError::write(&settings.out, e))?;
    let path = settings.out.join("predictions.jsonl");
    write_predictions(&path, &predictions)?;
    println!("{}", path.display());
    Ok(())
}

pub fn grade(settings: &Settings, predictions: Option<&Path>, model: Option<&Path>) -> Result<()> {
    let corpus = load(settings, None)?;
    let predictions = match predictions {
        Some(path) => read_predictions(path)?,
        None => predict_pairs(settings, &corpus, model, None)?,
    };
    let scored = score_corpus(&corpus, &predictions)?;
    let feedback = feedback_for_corpus(&corpus, &predictions)?;
    fs::create_dir_all(&settings.out).map_err(|e| CliError::write(&settings.out, e))?;
    let path = settings.out.join("scores.jsonl");
    write_scored(&path, &scored).map_err(|e| CliError::write(&path, e))?;

    let mut markdown = false;
    let mut plain = false;
    for f in &settings.formats {
        match f.as_str() {
            "markdown" | "md" => markdown = true,
            "plain" | "text" => plain = true,
            "csv" | "json" => {}
            other => {
                return Err(CliError::Config(format!(
                    "unknown feedback format {other:?} (expected markdown or plain)"
                )))
            }
        }
    }
    if markdown || !plain {
        let text: Vec<String> = feedback.iter().map(|r| r.render_markdown()).collect();
        write_out(&settings.out, "feedback.md", &text.join("\n"))?;
    }
    if plain {
        let text: Vec<String> = feedback.iter().map(|r| r.render_plain()).collect();
        write_out(&settings.out, "feedback.txt", &text.join("\n"))?;
    }
    println!("{}", path.display());
    Ok(())
}

/// Writes `<stem>.<ext>` for every requested format and prints the markdown table.
fn write_reports(settings: &Settings, stem: &str, result: &ProtocolResult) -> Result<()> {
    for format in settings.report_formats()? {
        write_out(&settings.out, &format!("{stem}.{}", format.extension()), &emit_report(result, format)?)?;
    }
    print!("{}", emit_report(result, ReportFormat::Markdown)?);
    Ok(())
}

fn score_predictor(name: &str) -> Result<Box<dyn ScorePredictor>> {
    match name {
        "nearest-neighbor" => Ok(Box::new(NearestNeighborScorer)),
        "gold" => Ok(Box::new(GoldScorer)),
        other => match other.strip_prefix("constant:").map(str::parse::<i64>) {
            Some(Ok(n)) => Ok(Box::new(ConstantScorer(n))),
            _ => Err(CliError::Config(format!(
                "unknown score predictor {other:?} (expected nearest-neighbor, gold or constant:<points>)"
            ))),
        },
    }
}

pub fn eval(settings: &Settings, formulation: Option<Formulation>, predictor: Option<&str>) -> Result<()> {
    let corpus = load(settings, None)?;
    let seeds = settings.seeds()?;
    let harness = Harness::default();
    match formulation.unwrap_or(settings.protocol.formulation) {
        Formulation::Rubric => {
            let result = harness.run_benchmark(
                &corpus,
                std::slice::from_ref(&settings.backend),
                &seeds,
                settings.split_fractions(),
            )?;
            write_reports(settings, "benchmark", &result)
        }
        Formulation::Score => {
            let predictor = score_predictor(predictor.unwrap_or(&settings.protocol.score_predictor))?;
            let result = harness.run_score_baseline(&corpus, predictor.as_ref(), &seeds, settings.split_fractions())?;
            write_reports(settings, "score_baseline", &result)
        }
    }
}

pub fn coldstart(settings: &Settings) -> Result<()> {
    let corpus = load(settings, None)?;
    let result = Harness::default().run_coldstart(&corpus, &settings.backend, settings.protocol.val_fraction)?;
    write_reports(settings, "coldstart", &result)
}

pub fn sweep(settings: &Settings) -> Result<()> {
    let corpus = load(settings, None)?;
    let result = Harness::default().run_fraction_sweep(
        &corpus,
        &settings.backend,
        &settings.protocol.fractions,
        &settings.seeds()?,
        settings.split_fractions(),
    )?;
    write_out(&settings.out, "curve.csv", &emit_curve(&result)?)?;
    write_reports(settings, "sweep", &result)
}

pub fn compare(settings: &Settings, rubric: &Path, score: &Path) -> Result<()> {
    let rubric: ProtocolResult = read_json(rubric, "rubric result")?;
    let score: ProtocolResult = read_json(score, "score result")?;
    let cmp = compare_formulations(&rubric, &score)?;
    for format in settings.report_formats()? {
        write_out(&settings.out, &format!("comparison.{}", format.extension()), &emit_comparison(&cmp, format)?)?;
    }
    print!("{}", emit_comparison(&cmp, ReportFormat::Markdown)?);
    Ok(())
}
