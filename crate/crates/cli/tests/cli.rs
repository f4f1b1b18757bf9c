use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const LUMINA: &str = "../core/tests/fixtures/lumina.json";

fn nodestory(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nodestory"))
        .args(args)
        .env_remove("NODESTORY_REMOTE_URL")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nodestory(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    serde_json::from_str(&ok(&all)).unwrap()
}

fn new_project(dir: &Path) -> String {
    let d = dir.join("lumina");
    let d = d.to_str().unwrap().to_owned();
    ok(&["new", &d, "--graph", LUMINA]);
    d
}

#[test]
fn validate_reports_and_sets_exit_code() {
    let v = json(&["validate", LUMINA]);
    assert_eq!((v["ok"].as_bool(), v["nodes"].as_u64(), v["edges"].as_u64()), (Some(true), Some(7), Some(8)));
    assert_eq!(v["topology"], "Branching");

    let tmp = tempfile::tempdir().unwrap();
    let cyclic = tmp.path().join("cyclic.json");
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(LUMINA).unwrap()).unwrap();
    doc["edges"].as_array_mut().unwrap().push(serde_json::json!({"id": "e7-1", "source": "7", "target": "1"}));
    std::fs::write(&cyclic, doc.to_string()).unwrap();
    let out = nodestory(&["validate", cyclic.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cycle 1 -> 2 -> 6 -> 7 -> 1"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(nodestory(&["export", "--path", "1", "--nodes", "2"]).status.code(), Some(2));
    assert_eq!(nodestory(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = nodestory(&["show", "-p", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = nodestory(&["--backend", "remote", "eval"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn project_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let p = new_project(tmp.path());
    let info = json(&["show", "-p", &p]);
    assert_eq!((info["version"].as_u64(), info["nodes"].as_u64()), (Some(1), Some(7)));

    let edited = json(&["edit", "-p", &p, "--nodes", "3", "--instruction", "make this sound mysterious"]);
    assert_eq!(edited["version"], 2);
    assert_eq!(edited["nodes"], serde_json::json!(["3"]));

    let jobs = json(&["media", "-p", &p, "--nodes", "1,3,6,7", "--kind", "audio", "--workers", "3"]);
    assert_eq!(jobs.as_array().unwrap().len(), 4);
    assert!(jobs.as_array().unwrap().iter().all(|j| j["status"] == "done"));

    let srt = ok(&["export", "-p", &p, "--path", "1,3,6,7", "--print", "srt"]);
    assert_eq!(srt.matches(" --> ").count(), 4);
    assert!(srt.starts_with("1\n00:00:00,000 --> "));

    let bad = nodestory(&["export", "-p", &p, "--path", "1,5,7", "--print", "srt"]);
    assert_eq!(bad.status.code(), Some(1));

    let out = tmp.path().join("bundle");
    let inv = json(&["export", "-p", &p, "--path", "1,3,6,7", "--out", out.to_str().unwrap()]);
    assert_eq!(inv["assets"].as_array().unwrap().len(), 4);
    assert!(out.join("subtitles.srt").is_file() && inv["documents"].as_array().unwrap().len() == 4);

    let snaps = json(&["snapshots", "-p", &p]);
    assert!(snaps.as_array().unwrap().len() >= 3);
    let restored = json(&["restore", "-p", &p, "1"]);
    let info = json(&["show", "-p", &p]);
    assert_eq!(info["version"], restored["version"]);
    let pruned = json(&["prune", "-p", &p, "--keep", "1"]);
    assert_eq!(pruned["snapshots"], 1);
}

#[test]
fn generate_then_chat() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("fresh");
    let p = p.to_str().unwrap();
    ok(&["new", p, "--name", "fresh"]);
    let made = json(&["generate", "-p", p, "--seed", "4", "A lighthouse keeper finds a message in a bottle."]);
    assert_eq!(made["version"], 2);
    let reply = json(&["chat", "-p", p, "--nodes", "1", "narrate this with a calm voice"]);
    assert_eq!(reply["task_kind"], "MediaGen");
    assert_eq!(reply["jobs"].as_array().unwrap().len(), 1);
    // The command waits for its jobs, so none are left for the next open to interrupt.
    let out = ok(&["show", "-p", p, "--format", "json"]);
    let info: Value = serde_json::from_str(&out).unwrap();
    assert!(info["version"].as_u64().unwrap() >= 3);
}

#[test]
fn eval_prints_the_table() {
    let text = ok(&["eval", "--seed", "7"]);
    assert!(text.starts_with("| Narrative Type | Correct / Total | Success Rate | 95% CI |"));
    assert!(text.contains("| Branching | 10 / 10 |"));

    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("mine.tsv");
    std::fs::write(&corpus, "linear\tA baker bakes one loaf from dawn to dusk.\n").unwrap();
    let out = json(&["eval", "--corpus", corpus.to_str().unwrap()]);
    assert_eq!(out["rows"].as_array().unwrap().len(), 1);
    assert_eq!(out["rows"][0]["summary"]["n"], 1);
}
