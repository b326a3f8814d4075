//! Pipeline steps shared by the CLI, the server and the tests.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use elicit_core::evaluation::GoldLabel;
use elicit_core::labelmodel::{calibrate, observations_from_decisions, LabelModelError};
use elicit_core::pipeline::{assemble, fit_variables};
use elicit_core::session::{ConflictPolicy, SessionError};
use elicit_core::{Candidate, Corpus, ProjectConfig, SessionState, Span};
use serde::Deserialize;

use crate::store::FitArtifact;

/// Groups, calibrates and fits `candidates`. Confirm and reject decisions
/// in `session` feed both the calibration bins and the refit penalty.
pub fn fit_project(
    config: &ProjectConfig,
    candidates: &[Candidate],
    session: Option<&SessionState>,
    alpha: f64,
) -> Result<FitArtifact, LabelModelError> {
    let decided = session.map(|s| s.decided_groups()).unwrap_or_default();
    let calibration = (!decided.is_empty()).then(|| calibrate(&observations_from_decisions(decided.iter().copied())));
    let mut validated: BTreeMap<String, bool> = BTreeMap::new();
    for (g, confirmed) in &decided {
        validated.entry(g.group_id.clone()).or_insert(*confirmed);
    }
    let mut groups = assemble(config, candidates, calibration.as_ref());
    let fits = fit_variables(config, &mut groups, &validated, alpha)?;
    let used = groups.iter().filter(|g| validated.contains_key(&g.group_id)).count();
    Ok(FitArtifact::new(alpha, if alpha > 0.0 { used } else { 0 }, fits, groups))
}

/// A fresh session over every document and variable of the project.
pub fn open_session(config: &ProjectConfig, corpus: &Corpus) -> Result<SessionState, SessionError> {
    SessionState::open(config.variables.clone(), corpus.doc_ids(), ConflictPolicy::default())
}

/// Loads a fit into the session, returning the number of new alerts.
pub fn load_fit(state: &mut SessionState, fit: &FitArtifact) -> Result<usize, SessionError> {
    let any_fit = fit.fits.iter().any(|f| f.fit.is_some());
    let alerts = state.load_groups(any_fit.then_some(fit.fit_version), fit.groups.clone())?;
    Ok(alerts.len())
}

#[derive(Debug, thiserror::Error)]
pub enum GoldError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GoldRow {
    doc_id: String,
    variable_id: String,
    value: String,
    #[serde(default)]
    evidence_start: Option<usize>,
    #[serde(default)]
    evidence_end: Option<usize>,
}

/// Gold labels from CSV (`doc_id,variable_id,value[,evidence_start,evidence_end]`)
/// or, for `.jsonl` files, one [`GoldLabel`] per line.
pub fn read_gold(path: &Path) -> Result<Vec<GoldLabel>, GoldError> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "jsonl") {
        return text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| GoldError::Format { line: i + 1, message: e.to_string() }))
            .collect();
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<GoldRow>().enumerate() {
        let row = row.map_err(|e| GoldError::Format { line: i + 2, message: e.to_string() })?;
        let evidence = match (row.evidence_start, row.evidence_end) {
            (Some(s), Some(e)) => Some(Span::new(row.doc_id.clone(), s, e)),
            (None, None) => None,
            _ => return Err(GoldError::Format { line: i + 2, message: "evidence needs both start and end".into() }),
        };
        out.push(GoldLabel { doc_id: row.doc_id, variable_id: row.variable_id, value: row.value, evidence });
    }
    Ok(out)
}
