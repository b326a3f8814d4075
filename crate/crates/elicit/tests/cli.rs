//! The `elicit` binary end to end.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;
use elicit::export::{render, ExportFormat};
use elicit::store::{load_state, read_json, EventLog, FitArtifact};
use elicit_core::session::Decision;
use elicit_core::ValidationRecord;

fn elicit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elicit")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = elicit(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = fixture("example_project/project.yaml");
    let docs = fixture("docs");
    let (cfg, docs) = (s(&cfg), s(&docs));

    let out = ok(&["ingest", "--config", cfg, "--corpus", docs, "--out", s(&d.join("corpus.jsonl"))]);
    assert_eq!(out.trim(), "5 documents");
    let out = ok(&["run-lfs", "--config", cfg, "--corpus", s(&d.join("corpus.jsonl")), "--out", s(&d.join("cands.jsonl"))]);
    assert!(out.contains("candidates, 0 labeling-function failures"), "{out}");
    // the text directory and its JSONL ingest give the same candidates
    ok(&["run-lfs", "--config", cfg, "--corpus", docs, "--out", s(&d.join("cands2.jsonl"))]);
    assert_eq!(std::fs::read(d.join("cands.jsonl")).unwrap(), std::fs::read(d.join("cands2.jsonl")).unwrap());

    ok(&["fit", "--config", cfg, "--candidates", s(&d.join("cands.jsonl")), "--out", s(&d.join("fit.json"))]);
    let log = d.join("session.jsonl");
    let out = ok(&["plan", "--config", cfg, "--corpus", docs, "--fit", s(&d.join("fit.json")), "--out", s(&log)]);
    assert!(out.contains("items to annotators"), "{out}");

    // an annotator confirms the top group of every human item
    let mut state = load_state(&log).unwrap();
    let before = state.log.len();
    let corpus = elicit::ingest::ingest_text_dir(&fixture("docs")).unwrap();
    let mut n = 0;
    while let Some(item) = state.next_item(&corpus, "ann1").unwrap() {
        let (group_id, decision) = match item.groups.first() {
            Some(g) => (Some(g.group_id.clone()), Decision::Confirm),
            None => (None, Decision::NoEvidence),
        };
        state
            .submit_validation(ValidationRecord {
                record_id: format!("r{n}"),
                doc_id: item.doc_id,
                variable_id: item.variable_id,
                group_id,
                decision,
                annotator_id: "ann1".into(),
                wall_time_ms: 1000 + n,
                timestamp: n,
            })
            .unwrap();
        n += 1;
    }
    assert!(n > 0);
    let (mut file, _) = EventLog::open(&log).unwrap();
    file.append_since(&state, before).unwrap();

    // refit with the validations; the penalty sees them
    ok(&["fit", "--config", cfg, "--candidates", s(&d.join("cands.jsonl")), "--log", s(&log), "--alpha", "100", "--out", s(&d.join("refit.json"))]);
    let refit: FitArtifact = read_json(&d.join("refit.json")).unwrap();
    assert!(refit.validated > 0);
    assert_eq!(refit.alpha, 100.0);

    for (format, name) in [("csv", "out.csv"), ("jsonl", "out.jsonl"), ("provenance", "prov.jsonl")] {
        ok(&["export", "--config", cfg, "--log", s(&log), "--format", format, "--out", s(&d.join(name))]);
    }
    let csv = std::fs::read(d.join("out.csv")).unwrap();
    assert_eq!(csv, render(&state, ExportFormat::Csv));
    let stdout = ok(&["export", "--config", cfg, "--log", s(&log)]);
    assert_eq!(stdout.as_bytes(), &csv[..]);
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(!text.contains("<pending>"), "{text}");

    let gold = d.join("gold.csv");
    std::fs::write(
        &gold,
        "doc_id,variable_id,value\nr01,victim_sex,Male\nr02,victim_sex,Female\nr03,victim_sex,Female\nr04,victim_sex,Male\nr05,victim_sex,Male\n\
         r01,prior_convictions,Prior Convictions\nr02,prior_convictions,No Prior Convictions\nr03,prior_convictions,Prior Convictions\nr05,prior_convictions,No Prior Convictions\n",
    )
    .unwrap();
    ok(&["eval", "--config", cfg, "--log", s(&log), "--gold", s(&gold), "--out", s(&d.join("report.json"))]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert!(report["precision"].as_f64().unwrap() > 0.0);
    assert_eq!(report["timing"]["records"].as_u64().unwrap(), n);

    ok(&["simulate", "--config", cfg, "--seed", "3", "--log", s(&log), "--gold", s(&gold), "--budgets", "0,0.5,1", "--accuracy", "1", "--out", s(&d.join("curve.csv"))]);
    let curve = std::fs::read_to_string(d.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "budget,deferred,deferred_fraction,precision,recall,f1");
    assert_eq!(curve.lines().count(), 4);
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["frobnicate"][..],
        &[][..],
        &["fit", "--config", "x.yaml"][..],
        &["export", "--log", "x"][..],
    ] {
        let out = elicit(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("usage: elicit"), "{args:?}");
    }
    let cfg = fixture("example_project/project.yaml");
    let out = elicit(&["ingest", "--config", s(&cfg), "--corpus", s(&fixture("docs"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(elicit(&["--help"]).status.success());
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\"y\"}\n{\"id\":\"c\"}\n").unwrap();
    let cfg = fixture("example_project/project.yaml");
    let out = elicit(&["ingest", "--config", s(&cfg), "--corpus", s(&bad), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = elicit(&["export", "--config", "/nonexistent/project.yaml", "--log", "x"]);
    assert_eq!(out.status.code(), Some(2));

    let log = dir.path().join("log.jsonl");
    std::fs::write(&log, "{\"elicit_event_log\":1}\nnot json\n").unwrap();
    let out = elicit(&["export", "--config", s(&cfg), "--log", s(&log)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("byte offset 23"), "{}", String::from_utf8_lossy(&out.stderr));
}
