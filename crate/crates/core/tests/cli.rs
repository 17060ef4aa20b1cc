use std::path::Path;
use std::process::{Command, Output};

use anchor_topk::eval::TermList;
use anchor_topk::model::BowClassifier;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anchor-topk"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = run(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(dir: &Path, file: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(file)).unwrap()).unwrap()
}

/// Small planted corpus plus a trained model in a fresh directory.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--out", "train.jsonl", "--documents", "400", "--seed", "1"], d);
    ok(&["synth", "--out", "test.jsonl", "--documents", "120", "--seed", "2"], d);
    ok(&["train", "--corpus", "train.jsonl", "--id-field", "id", "--out", "model.json"], d);
    dir
}

const DATA: [&str; 6] = ["--corpus", "test.jsonl", "--id-field", "id", "--model", "model.json"];

fn topk(d: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["topk"];
    args.extend(DATA);
    args.extend(["--class", "positive"]);
    args.extend(extra);
    run(&args, d)
}

#[test]
fn missing_corpus_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--corpus", "nope.csv", "--out", "m.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn training_is_reproducible_and_reloads() {
    let dir = workspace();
    let d = dir.path();
    ok(&["train", "--corpus", "train.jsonl", "--id-field", "id", "--out", "again.json"], d);
    let a = std::fs::read(d.join("model.json")).unwrap();
    let b = std::fs::read(d.join("again.json")).unwrap();
    assert_eq!(a, b);
    let m = BowClassifier::load(d.join("model.json")).unwrap();
    m.save(d.join("resaved.json")).unwrap();
    assert_eq!(BowClassifier::load(d.join("resaved.json")).unwrap(), m);
    assert!(json(d, "model.json.manifest.json")["summary"]["train_accuracy"].as_f64().unwrap() > 0.8);
}

#[test]
fn topk_needs_a_seed() {
    let dir = workspace();
    let out = topk(dir.path(), &["--out", "t.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_class_and_profile_are_config_errors() {
    let dir = workspace();
    assert_eq!(topk(dir.path(), &["--seed", "1", "--class", "neutral"]).status.code(), Some(2));
    assert_eq!(topk(dir.path(), &["--seed", "1", "--profile", "fastest"]).status.code(), Some(2));
    assert_eq!(topk(dir.path(), &["--seed", "1", "--agg", "median"]).status.code(), Some(2));
}

#[test]
fn optimized_profile_uses_fewer_calls() {
    let dir = workspace();
    let d = dir.path();
    for p in ["baseline", "optimized"] {
        let out = format!("{p}.json");
        let o = topk(d, &["--seed", "3", "--k", "10", "--profile", p, "--out", &out]);
        assert!(o.status.success());
    }
    let calls = |p: &str| json(d, &format!("{p}.json.manifest.json"))["predictor_calls"].as_u64().unwrap();
    assert!(calls("optimized") < calls("baseline"));
    let list = TermList::load(d.join("optimized.json")).unwrap();
    assert_eq!(list.len(), 10);
    list.validate().unwrap();
}

#[test]
fn large_k_warns_and_emits_full_ranking() {
    let dir = workspace();
    let d = dir.path();
    let o = topk(d, &["--seed", "1", "--k", "100000", "--agg", "base", "--out", "all.json"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let list = TermList::load(d.join("all.json")).unwrap();
    assert!(list.len() > 50 && list.len() < 100000);
}

#[test]
fn call_budget_stops_early_with_flushed_snapshots() {
    let dir = workspace();
    let d = dir.path();
    let o = topk(d, &["--seed", "1", "--max-calls", "3000", "--out", "t.json", "--snapshots", "s.jsonl"]);
    assert!(o.status.success());
    let m = json(d, "t.json.manifest.json");
    assert_eq!(m["summary"]["completed"], false);
    let processed = m["summary"]["documents_processed"].as_u64().unwrap();
    let lines = std::fs::read_to_string(d.join("s.jsonl")).unwrap();
    assert_eq!(lines.lines().count() as u64, processed);
    for l in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(v["t_sec"].is_f64() && v["calls"].is_u64() && v["doc_index"].is_u64() && v["topk"].is_array());
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = workspace();
    let d = dir.path();
    let cfg = serde_json::json!({
        "corpus": "test.jsonl",
        "ingest": { "id_field": "id" },
        "predictor": { "model": "model.json" },
        "class": "negative",
        "k": 7,
        "seed": 4,
        "agg": "sq",
    });
    std::fs::write(d.join("run.json"), cfg.to_string()).unwrap();
    ok(&["--config", "run.json", "topk", "--out", "a.json"], d);
    ok(&["--config", "run.json", "topk", "--k", "3", "--out", "b.json"], d);
    let a = TermList::load(d.join("a.json")).unwrap();
    let b = TermList::load(d.join("b.json")).unwrap();
    assert_eq!((a.len(), b.len()), (7, 3));
    assert_eq!((a.class.as_str(), a.agg.as_str()), ("negative", "sq"));
    assert_eq!(&a.terms[..3], &b.terms[..]);
    assert_eq!(json(d, "b.json.manifest.json")["config"]["k"], 3);
}

#[test]
fn eval_aopc_and_timeline() {
    let dir = workspace();
    let d = dir.path();
    assert!(topk(d, &["--seed", "1", "--k", "5", "--out", "t.json", "--snapshots", "s.jsonl"]).status.success());
    let mut args = vec!["eval-aopc"];
    args.extend(DATA);
    args.extend(["--terms", "t.json", "--out", "aopc.json", "--snapshots", "s.jsonl", "--timeline", "tl.csv"]);
    ok(&args, d);
    let a = json(d, "aopc.json");
    assert_eq!(a["k"], 5);
    assert_eq!(a["prefix_drops"].as_array().unwrap().len(), 5);
    let tl = std::fs::read_to_string(d.join("tl.csv")).unwrap();
    assert!(tl.starts_with("t_sec,calls,aopc\n"));
    let last: f64 = tl.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((last - a["value"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn compare_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    TermList::from_words("c", ["a", "b", "c"]).save(d.join("x.json")).unwrap();
    TermList::from_words("c", ["d", "e", "f"]).save(d.join("y.json")).unwrap();
    ok(&["compare", "x.json", "y.json", "--out", "cmp.json", "--matrix", "m.csv"], d);
    let r = json(d, "cmp.json");
    assert_eq!(r["shared_terms"], serde_json::json!([[1.0, 0.0], [0.0, 1.0]]));
    assert!(r["aopc"].is_null());
    assert_eq!(std::fs::read_to_string(d.join("m.csv")).unwrap().lines().count(), 3);

    std::fs::write(d.join("bad.json"), "{\"class\": 3}").unwrap();
    assert_eq!(run(&["compare", "x.json", "bad.json"], d).status.code(), Some(2));
}

#[test]
fn synth_truth_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--out", "c.jsonl", "--truth", "t.json", "--planted", "10", "--noise", "0", "--documents", "50"], d);
    let t = json(d, "t.json");
    assert_eq!(t["planted"]["positive"].as_array().unwrap().len(), 10);
    assert_eq!(t["planted"]["negative"].as_array().unwrap().len(), 10);
    let rows = std::fs::read_to_string(d.join("c.jsonl")).unwrap();
    assert_eq!(rows.lines().count(), 50);
    ok(&["synth", "--out", "c2.jsonl", "--truth", "t2.json", "--planted", "10", "--noise", "0", "--documents", "50"], d);
    assert_eq!(rows, std::fs::read_to_string(d.join("c2.jsonl")).unwrap());
}

#[test]
fn anchors_trace() {
    let dir = workspace();
    let d = dir.path();
    let mut args = vec!["anchors"];
    args.extend(DATA);
    args.extend(["--doc", "s00003", "--doc", "s00004", "--trace", "trace.jsonl"]);
    ok(&args, d);
    let text = std::fs::read_to_string(d.join("trace.jsonl")).unwrap();
    let docs: std::collections::BTreeSet<String> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["doc"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(docs.into_iter().collect::<Vec<_>>(), ["s00003", "s00004"]);

    let mut args = vec!["anchors"];
    args.extend(DATA);
    args.extend(["--doc", "missing"]);
    assert_eq!(run(&args, d).status.code(), Some(2));
}

#[test]
fn failing_external_predictor_is_a_runtime_error() {
    let dir = workspace();
    let d = dir.path();
    let out = run(
        &["topk", "--corpus", "test.jsonl", "--predictor-endpoint", "cmd:exit 1", "--class", "positive", "--seed", "1"],
        d,
    );
    assert_eq!(out.status.code(), Some(3));
}
