//! Glue between labeling, merging and the label model.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::labeling::{merge_candidates, run_keyword_lf, run_similarity_lf, select_top_k, Candidate, Embedder, ExplanationGroup};
use crate::labelmodel::{
    apply_calibration, build_lambda, fit_with_penalty, score_groups, CalibrationMap, LabelModelError, LabelModelFit,
    OmegaMask,
};
use crate::schema::{LfSpec, ProjectConfig};

/// A labeling function that failed on one document and so abstained there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfFailure {
    pub lf_id: String,
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LfRun {
    pub candidates: Vec<Candidate>,
    pub failures: Vec<LfFailure>,
}

impl LfRun {
    pub fn extend(&mut self, other: LfRun) {
        self.candidates.extend(other.candidates);
        self.failures.extend(other.failures);
    }
}

/// Runs the keyword and similarity LFs. Regex and external LFs need the
/// standard library and are run by the caller.
pub fn run_native_lfs(config: &ProjectConfig, corpus: &Corpus, embedder: &dyn Embedder) -> LfRun {
    let mut run = LfRun::default();
    for lf in &config.lf_configs {
        for doc in corpus.documents() {
            for var in &config.variables {
                match &lf.spec {
                    LfSpec::Keyword => run.candidates.extend(run_keyword_lf(&lf.lf_id, doc, var)),
                    LfSpec::Similarity { threshold } => {
                        match run_similarity_lf(&lf.lf_id, doc, var, embedder, *threshold, config.k) {
                            Ok(c) => run.candidates.extend(c),
                            Err(e) => run.failures.push(LfFailure {
                                lf_id: lf.lf_id.clone(),
                                doc_id: doc.doc_id.clone(),
                                variable_id: None,
                                message: alloc::format!("{e}"),
                            }),
                        }
                    }
                    LfSpec::Regex { .. } | LfSpec::External { .. } => {}
                }
            }
        }
    }
    run
}

/// Calibrates (when a map is given), applies top-K and merges.
pub fn assemble(config: &ProjectConfig, candidates: &[Candidate], calibration: Option<&CalibrationMap>) -> Vec<ExplanationGroup> {
    let calibrated: Vec<Candidate> = match calibration {
        Some(map) => candidates.iter().map(|c| apply_calibration(map, c)).collect(),
        None => candidates.to_vec(),
    };
    let selected = select_top_k(&calibrated, config.k);
    merge_candidates(&selected, config.merge_overlap_threshold)
}

/// Outcome of fitting one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableFit {
    pub variable_id: String,
    pub rows: usize,
    pub fit: Option<LabelModelFit>,
    /// Why there is no fit; groups of this variable keep their fallback
    /// confidences.
    pub error: Option<String>,
}

/// Fits one label model per variable and scores every group.
///
/// `validated` maps group ids to the annotator's verdict (`true` = the
/// value was confirmed) and only takes effect when `alpha > 0`.
pub fn fit_variables(
    config: &ProjectConfig,
    groups: &mut [ExplanationGroup],
    validated: &BTreeMap<String, bool>,
    alpha: f64,
) -> Result<Vec<VariableFit>, LabelModelError> {
    let roster = config.lf_roster();
    let omega = OmegaMask::from_dependencies(&roster, &config.dependency_pairs)?;
    let mut out = Vec::new();
    for var in &config.variables {
        let mut mine: Vec<ExplanationGroup> =
            groups.iter().filter(|g| g.variable_id == var.variable_id).cloned().collect();
        let mut lambda = build_lambda(&mine, &roster)?;
        lambda.variable_id = var.variable_id.clone();
        let rows: Vec<(usize, bool)> = validated
            .iter()
            .filter_map(|(gid, &y)| lambda.row_of(gid).map(|r| (r, y)))
            .collect();
        let result = fit_with_penalty(&lambda, &omega, &rows, alpha, &config.solver);
        let (fit, error) = match result {
            Ok(f) => (Some(f), None),
            Err(e @ (LabelModelError::InsufficientData { .. } | LabelModelError::Singular)) => (None, Some(alloc::format!("{e}"))),
            Err(e) => return Err(e),
        };
        score_groups(fit.as_ref(), &lambda, &mut mine)?;
        let scored: BTreeMap<&str, f64> = mine.iter().map(|g| (g.group_id.as_str(), g.group_confidence)).collect();
        for g in groups.iter_mut().filter(|g| g.variable_id == var.variable_id) {
            g.group_confidence = scored[g.group_id.as_str()];
        }
        out.push(VariableFit { variable_id: var.variable_id.clone(), rows: lambda.rows(), fit, error });
    }
    Ok(out)
}
