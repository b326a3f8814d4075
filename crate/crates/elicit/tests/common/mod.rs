#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

/// Compares `actual` with a frozen file. Set `ELICIT_BLESS=1` to rewrite it.
pub fn golden(rel: &str, actual: &[u8]) {
    let path = fixture(rel);
    if std::env::var_os("ELICIT_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(
        expected == actual,
        "{} differs from output:\n{}",
        path.display(),
        String::from_utf8_lossy(actual)
    );
}

use elicit::ingest::ingest_text_dir;
use elicit::lfs::{run_all_lfs, HttpTransport};
use elicit::project::load_project;
use elicit::store::{EventLog, FitArtifact};
use elicit::workflow::{fit_project, load_fit, open_session};
use elicit_core::{Corpus, ProjectConfig, SessionState};

pub struct Pipeline {
    pub config: ProjectConfig,
    pub corpus: Corpus,
    pub fit: FitArtifact,
    pub state: SessionState,
    pub log: PathBuf,
    pub _dir: tempfile::TempDir,
}

/// Example project over the fixture documents: run LFs, fit, open a
/// session with the groups loaded and write its log.
pub fn pipeline() -> Pipeline {
    let config = load_project(fixture("example_project/project.yaml")).unwrap();
    let corpus = ingest_text_dir(&fixture("docs")).unwrap();
    let run = run_all_lfs(&config, &corpus, &HttpTransport).unwrap();
    assert!(run.failures.is_empty());
    let fit = fit_project(&config, &run.candidates, None, config.alpha).unwrap();
    let mut state = open_session(&config, &corpus).unwrap();
    load_fit(&mut state, &fit).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("session.jsonl");
    EventLog::create(&log, &state.log).unwrap();
    Pipeline { config, corpus, fit, state, log, _dir: dir }
}
