//! Weak-supervision label model over explanation groups.
//!
//! Every explanation group of a variable is one row of a vote matrix λ with
//! one column per labeling function: `+1` when the LF is a member of the
//! group, `-1` when it voted a different value for the same document and
//! variable, `0` when it abstained. With `Σ` the column covariance of λ, the
//! per-LF vector `ẑ` minimizes the masked objective
//!
//! ```text
//! ‖(Σ⁻¹ + z zᵀ) ⊙ Ω‖²_F
//! ```
//!
//! where Ω selects the LF pairs assumed conditionally independent. Weights
//! are the sign-resolved, non-negative part of `ẑ`, and a group's confidence
//! is `logistic(Σ_k w_k λ_k)`. Validated groups can pull the fit toward the
//! annotator through an α-weighted quadratic disagreement penalty.

mod calibration;
mod linalg;
mod rank;
mod solver;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::labeling::ExplanationGroup;

pub use calibration::{apply_calibration, calibrate, observations_from_decisions, BinStat, CalibrationMap, Observation, CALIBRATION_BINS};
pub use linalg::{covariance, spd_inverse};
pub use rank::{logistic, majority_rule, predict_proba, rank_explanations, score_groups};
pub use solver::{disagreement, fit, fit_with_penalty, masked_objective};

/// Version tag written into serialized fits.
pub const FIT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LabelModelError {
    #[error("labeling function {0} is not in the roster")]
    UnknownLf(String),
    #[error("groups span several variables ({0} and {1})")]
    MixedVariables(String, String),
    #[error("need at least 2 rows and 2 labeling functions, got {rows}x{cols}")]
    InsufficientData { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("validated row {0} is out of range")]
    InvalidRow(usize),
    #[error("covariance matrix is not positive definite; increase the ridge")]
    Singular,
    #[error("invalid solver parameters: {0}")]
    InvalidParams(&'static str),
}

/// Vote matrix of one variable: one row per explanation group, one column
/// per labeling function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMatrix {
    pub variable_id: String,
    pub lf_ids: Vec<String>,
    pub group_ids: Vec<String>,
    pub doc_ids: Vec<String>,
    /// Row-major entries in `{-1, 0, +1}`.
    pub entries: Vec<i8>,
}

impl LambdaMatrix {
    pub fn rows(&self) -> usize {
        self.group_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.lf_ids.len()
    }

    pub fn row(&self, i: usize) -> &[i8] {
        let m = self.cols();
        &self.entries[i * m..(i + 1) * m]
    }

    pub fn row_of(&self, group_id: &str) -> Option<usize> {
        self.group_ids.iter().position(|g| g == group_id)
    }

    /// Builds a matrix straight from rows (synthetic data, tests).
    pub fn from_rows(variable_id: &str, lf_ids: Vec<String>, rows: &[Vec<i8>]) -> Result<Self, LabelModelError> {
        let m = lf_ids.len();
        let mut entries = Vec::with_capacity(rows.len() * m);
        for r in rows {
            if r.len() != m {
                return Err(LabelModelError::DimensionMismatch { expected: m, got: r.len() });
            }
            entries.extend_from_slice(r);
        }
        Ok(Self {
            variable_id: variable_id.to_string(),
            lf_ids,
            group_ids: (0..rows.len()).map(|i| alloc::format!("row{i}")).collect(),
            doc_ids: vec![String::new(); rows.len()],
            entries,
        })
    }

    pub(crate) fn as_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Deterministic row order for groups of one variable.
pub(crate) fn sort_rows(groups: &mut [&ExplanationGroup]) {
    groups.sort_by(|a, b| {
        a.doc_id
            .cmp(&b.doc_id)
            .then(a.merged_span.start.cmp(&b.merged_span.start))
            .then_with(|| a.value.cmp(&b.value))
            .then(a.merged_span.end.cmp(&b.merged_span.end))
            .then_with(|| a.group_id.cmp(&b.group_id))
    });
}

/// Builds λ for the groups of one variable.
pub fn build_lambda(groups: &[ExplanationGroup], lf_roster: &[String]) -> Result<LambdaMatrix, LabelModelError> {
    let variable_id = groups.first().map(|g| g.variable_id.clone()).unwrap_or_default();
    let col: BTreeMap<&str, usize> = lf_roster.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    // values each LF voted for, per document
    let mut votes: BTreeMap<&str, BTreeMap<usize, BTreeSet<&str>>> = BTreeMap::new();
    for g in groups {
        if g.variable_id != variable_id {
            return Err(LabelModelError::MixedVariables(variable_id, g.variable_id.clone()));
        }
        for c in &g.members {
            let k = *col.get(c.lf_id.as_str()).ok_or_else(|| LabelModelError::UnknownLf(c.lf_id.clone()))?;
            votes.entry(g.doc_id.as_str()).or_default().entry(k).or_default().insert(g.value.as_str());
        }
    }

    let mut ordered: Vec<&ExplanationGroup> = groups.iter().collect();
    sort_rows(&mut ordered);

    let m = lf_roster.len();
    let mut entries = vec![0i8; ordered.len() * m];
    for (r, g) in ordered.iter().enumerate() {
        let doc_votes = &votes[g.doc_id.as_str()];
        for k in 0..m {
            let entry = if g.has_member_from(&lf_roster[k]) {
                1
            } else if doc_votes.get(&k).is_some_and(|vals| vals.iter().any(|v| *v != g.value)) {
                -1
            } else {
                0
            };
            entries[r * m + k] = entry;
        }
    }
    Ok(LambdaMatrix {
        variable_id,
        lf_ids: lf_roster.to_vec(),
        group_ids: ordered.iter().map(|g| g.group_id.clone()).collect(),
        doc_ids: ordered.iter().map(|g| g.doc_id.clone()).collect(),
        entries,
    })
}

/// Symmetric 0/1 mask with a zero diagonal; entry `(i, j) = 1` when LFs `i`
/// and `j` are treated as conditionally independent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaMask {
    pub m: usize,
    pub mask: Vec<u8>,
}

impl OmegaMask {
    /// Every off-diagonal pair independent.
    pub fn full(m: usize) -> Self {
        let mut mask = vec![1u8; m * m];
        for i in 0..m {
            mask[i * m + i] = 0;
        }
        Self { m, mask }
    }

    /// Full mask with the declared dependent pairs removed.
    pub fn from_dependencies(lf_ids: &[String], pairs: &[(String, String)]) -> Result<Self, LabelModelError> {
        let mut omega = Self::full(lf_ids.len());
        let pos = |id: &str| {
            lf_ids
                .iter()
                .position(|l| l == id)
                .ok_or_else(|| LabelModelError::UnknownLf(id.to_string()))
        };
        for (a, b) in pairs {
            let (i, j) = (pos(a)?, pos(b)?);
            omega.mask[i * omega.m + j] = 0;
            omega.mask[j * omega.m + i] = 0;
        }
        Ok(omega)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.m + j] != 0
    }
}

/// Gradient-descent settings; defaults match the documented solver regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Every coordinate of `z` starts here.
    pub init: f64,
    pub step: f64,
    pub max_iter: usize,
    /// Stop once the gradient's largest absolute entry is below this.
    pub tol: f64,
    /// Added to the covariance diagonal before inversion.
    pub ridge: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { init: 0.1, step: 0.01, max_iter: 5000, tol: 1e-8, ridge: 1e-6 }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err("step must be positive");
        }
        if self.max_iter == 0 {
            return Err("max_iter must be at least 1");
        }
        if !(self.tol > 0.0) {
            return Err("tol must be positive");
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err("ridge must be non-negative");
        }
        if !self.init.is_finite() {
            return Err("init must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// The LF voted identically on every row; it carries no signal and keeps weight 0.
    ConstantColumn { lf_id: String },
    /// The sign-resolved estimate was negative and was clipped to 0.
    NegativeWeightClipped { lf_id: String, value: f64 },
    /// Descent did not beat `z = 0`, which was returned instead.
    TrivialOptimum,
}

/// Result of fitting the label model for one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModelFit {
    pub format_version: u32,
    pub variable_id: String,
    pub lf_ids: Vec<String>,
    pub z_hat: Vec<f64>,
    /// `+1` or `-1`; weights are `max(sign * z_hat, 0)`.
    pub sign: i8,
    pub weights: Vec<f64>,
    /// Objective minimized by the solver at `z_hat` (includes the penalty).
    pub objective_value: f64,
    /// Objective at `z = 0`, for reference.
    pub trivial_objective: f64,
    /// Penalty term `Σ (f − y)²` at `z_hat` (0 without validations).
    pub penalty_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub alpha: f64,
    pub validated_count: usize,
    pub sigma_ridge: f64,
    pub omega: OmegaMask,
    pub params: SolverParams,
    pub diagnostics: Vec<Diagnostic>,
}
