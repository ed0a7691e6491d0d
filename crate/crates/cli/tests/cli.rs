use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rubricnli")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) -> PathBuf {
    let out = run(&["synth", "--seed", seed, "--out", s(dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    dir.join("corpus.json")
}

/// Checks the single machine-readable error line and returns its message.
fn error_line(o: &Output, class: &str, code: i32) -> String {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err}");
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], class);
    assert_eq!(v["exit_code"], code);
    v["message"].as_str().unwrap().to_string()
}

#[test]
fn synth_then_validate_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "7");
    let out = run(&["validate", s(&corpus)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "");
    assert_eq!(stderr(&out), "");
}

#[test]
fn dangling_judgment_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "7");
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(&corpus).unwrap()).unwrap();
    doc["judgments"][0]["rubric_item_id"] = "q1-ghost".into();
    fs::write(&corpus, doc.to_string()).unwrap();
    let out = run(&["validate", s(&corpus)]);
    error_line(&out, "data", 1);
    let lines = stdout(&out);
    assert!(lines.lines().any(|l| l.contains("q1-ghost") && l.contains("q1-r001")), "{lines}");
}

#[test]
fn unreadable_and_malformed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let message = error_line(&run(&["validate", s(&missing)]), "config", 2);
    assert!(message.contains("missing.json"));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{ not json").unwrap();
    error_line(&run(&["validate", s(&broken)]), "data", 1);
    error_line(&run(&["stats", "--corpus", s(&broken), "--out", s(dir.path())]), "data", 1);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "1");
    let config = dir.path().join("run.toml");
    fs::write(&config, "corpus = \"corpus.json\"\nbackends = []\n").unwrap();
    let message = error_line(&run(&["eval", "--config", s(&config)]), "config", 2);
    assert!(message.contains("unknown field"), "{message}");

    error_line(&run(&["eval", "--corpus", s(&corpus), "--backend", "neural"]), "config", 2);
    error_line(&run(&["eval", "--corpus", s(&corpus), "--format", "xml", "--out", s(dir.path())]), "config", 2);
    error_line(&run(&["train", "--corpus", s(&corpus), "--backend", "oracle"]), "config", 2);
    error_line(&run(&["predict", "--corpus", s(&corpus), "--out", s(dir.path())]), "config", 2);
    error_line(&run(&["frobnicate"]), "config", 2);

    fs::write(&config, "corpus = \"corpus.json\"\n[protocol]\nseeds = []\n").unwrap();
    error_line(&run(&["eval", "--config", s(&config)]), "config", 2);
}

#[test]
fn backend_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "1");
    fs::write(dir.path().join("replay.jsonl"), "").unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        "corpus = \"corpus.json\"\n[backend]\nkind = \"generative\"\n[backend.adapter]\nreplay_file = \"replay.jsonl\"\n",
    )
    .unwrap();
    let message = error_line(&run(&["eval", "--config", s(&config), "--seed", "1", "--out", s(dir.path())]), "backend", 3);
    assert!(message.contains("unavailable"), "{message}");
    assert!(corpus.exists());
}

#[test]
fn grade_with_oracle_equals_gold_aggregation() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "7");
    let before = fs::read(&corpus).unwrap();
    let out = run(&["grade", "--corpus", s(&corpus), "--backend", "oracle", "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read(&corpus).unwrap(), before, "input corpus was modified");

    // Reference grade straight from the corpus JSON.
    let doc: Value = serde_json::from_str(&String::from_utf8(before).unwrap()).unwrap();
    let points: HashMap<&str, i64> = doc["rubric_items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| (i["id"].as_str().unwrap(), i["points"].as_i64().unwrap()))
        .collect();
    let mut expected: HashMap<&str, i64> = HashMap::new();
    for j in doc["judgments"].as_array().unwrap() {
        let e = expected.entry(j["response_id"].as_str().unwrap()).or_default();
        if j["label"].as_bool().unwrap() {
            *e += points[j["rubric_item_id"].as_str().unwrap()];
        }
    }
    let scores = fs::read_to_string(dir.path().join("scores.jsonl")).unwrap();
    let mut n = 0;
    for line in scores.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["earned"].as_i64().unwrap(), expected[v["response_id"].as_str().unwrap()]);
        n += 1;
    }
    assert_eq!(n, expected.len());
    let feedback = fs::read_to_string(dir.path().join("feedback.md")).unwrap();
    assert_eq!(feedback.matches("q1-r0").count(), 50);
}

#[test]
fn oracle_eval_with_three_seeds_renders_perfect_cells() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "7");
    let config = dir.path().join("oracle.toml");
    fs::write(&config, "[backend]\nkind = \"oracle\"\n[protocol]\nseeds = [1, 2, 3]\n").unwrap();
    let out = run(&["eval", "--config", s(&config), "--corpus", s(&corpus), "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let md = fs::read_to_string(dir.path().join("benchmark.md")).unwrap();
    assert_eq!(stdout(&out), md);
    assert!(md.contains("- seeds: 1, 2, 3"));
    let row = md.lines().find(|l| l.starts_with("| oracle")).unwrap();
    let cells: Vec<&str> = row.trim_matches('|').split('|').map(str::trim).collect();
    assert_eq!(cells, ["oracle", "100.0 (0.0)", "1.000 (0.000)", "1.000 (0.000)", "1.000 (0.000)"]);
    for ext in ["csv", "json"] {
        assert!(dir.path().join(format!("benchmark.{ext}")).exists());
    }
}

#[test]
fn train_predict_grade_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "2");
    let c = s(&corpus);
    let d = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    assert!(run(&["train", "--corpus", c, "--seed", "4", "--out", &d("train")]).status.success());
    let log: Value = serde_json::from_str(&fs::read_to_string(d("train/training_log.json")).unwrap()).unwrap();
    assert_eq!(log["seeds"], serde_json::json!([4]));
    assert_eq!(log["training_log"]["epochs"].as_array().unwrap().len(), 10);

    assert!(run(&["split", "--corpus", c, "--seed", "4", "--out", &d("split")]).status.success());
    let out = run(&[
        "predict", "--corpus", c, "--model", &d("train/model.json"), "--split", &d("split/split.json"),
        "--partition", "test", "--out", &d("predict"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let n_test = fs::read_to_string(d("predict/predictions.jsonl")).unwrap().lines().count();
    assert_eq!(n_test, 4 * 7 * 5);

    // Grading needs every item of every response.
    let partial = run(&["grade", "--corpus", c, "--predictions", &d("predict/predictions.jsonl"), "--out", &d("g")]);
    error_line(&partial, "data", 1);
    let out = run(&["grade", "--corpus", c, "--model", &d("train/model.json"), "--format", "plain", "--out", &d("g")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(d("g/feedback.txt")).unwrap();
    assert!(text.contains("[x]") && text.contains("[ ]"));
}

#[test]
fn flags_override_config_and_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "3");
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        "corpus = \"corpus.json\"\nout = \"from-config\"\nformats = [\"json\"]\n[backend]\nkind = \"lexical\"\n[protocol]\nseeds = [5, 6]\nfractions = [0.5, 1]\n",
    )
    .unwrap();
    let out = run(&["sweep", "--config", s(&config)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let from_config = dir.path().join("from-config");
    let v: Value = serde_json::from_str(&fs::read_to_string(from_config.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(v["provenance"]["seeds"], serde_json::json!([5, 6]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert!(!from_config.join("sweep.md").exists());
    assert!(fs::read_to_string(from_config.join("curve.csv")).unwrap().contains("0.5,f1,"));

    let flagged = dir.path().join("flagged");
    let out = run(&["sweep", "--config", s(&config), "--seed", "9", "--backend", "oracle", "--format", "csv", "--out", s(&flagged)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(flagged.join("sweep.csv")).unwrap();
    assert!(csv.contains("# seeds: 9\n"));
    assert!(csv.contains("\"kind\":\"oracle\""));
    assert!(corpus.exists());
}

#[test]
fn split_holdout_and_subsample() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "5");
    let out = run(&["split", "--corpus", s(&corpus), "--holdout", "q2", "--subsample", "1/2", "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().skip(1).collect::<Vec<_>>(), ["train\t69", "val\t15", "test\t50"]);
    let unknown = run(&["split", "--corpus", s(&corpus), "--holdout", "q9", "--out", s(dir.path())]);
    error_line(&unknown, "config", 2);
}

#[test]
fn compare_rejects_mismatched_results() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(&dir.path().join("a"), "1");
    let b = synth(&dir.path().join("b"), "2");
    let out_a = dir.path().join("ra");
    let out_b = dir.path().join("rb");
    assert!(run(&["eval", "--corpus", s(&a), "--backend", "lexical", "--seed", "1", "--out", s(&out_a)]).status.success());
    let score = run(&["eval", "--corpus", s(&b), "--formulation", "score", "--seed", "1", "--out", s(&out_b)]);
    assert!(score.status.success());
    let out = run(&[
        "compare", "--rubric", s(&out_a.join("benchmark.json")), "--score", s(&out_b.join("score_baseline.json")),
        "--out", s(dir.path()),
    ]);
    let message = error_line(&out, "data", 1);
    assert!(message.contains("corpus"), "{message}");
}
