//! Extraction schemas and run configuration.
//!
//! A project declares the variables to extract (each with its label values,
//! questions and keywords), the labeling-function roster and the knobs for
//! top-K validation, merging, the label model and deferral. Parsing from YAML
//! lives in the companion crate; everything here is validation and reporting.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::labelmodel::SolverParams;

/// One extraction target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSchema {
    pub variable_id: String,
    pub display_name: String,
    pub label_values: Vec<String>,
    /// Value that stands for "no evidence in the document", if the variable has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_value: Option<String>,
    #[serde(default)]
    pub questions: Vec<String>,
    #[serde(default)]
    pub keywords: BTreeMap<String, Vec<String>>,
}

impl VariableSchema {
    pub fn has_value(&self, value: &str) -> bool {
        self.label_values.iter().any(|v| v == value)
    }

    pub fn keyword_count(&self) -> usize {
        self.keywords.values().map(Vec::len).sum()
    }

    /// Value recorded when an annotator states there is no evidence.
    pub fn no_evidence_value(&self) -> &str {
        self.negative_value.as_deref().unwrap_or(NOT_MENTIONED)
    }
}

/// Cell value for "no evidence" on variables without a negative value.
pub const NOT_MENTIONED: &str = "not mentioned";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfKind {
    Keyword,
    Regex,
    Similarity,
    External,
}

impl LfKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LfKind::Keyword => "keyword",
            LfKind::Regex => "regex",
            LfKind::Similarity => "similarity",
            LfKind::External => "external",
        }
    }
}

/// Per-kind labeling-function parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LfSpec {
    /// Whole-word keyword lookup using the variables' keyword schema.
    Keyword,
    /// A regular expression that votes a fixed value of one variable.
    Regex {
        variable_id: String,
        value: String,
        pattern: String,
        #[serde(default = "default_regex_confidence")]
        confidence: f64,
    },
    /// Sentence/label cosine similarity with the built-in hashed embedder.
    Similarity {
        #[serde(default = "default_similarity_threshold")]
        threshold: f64,
    },
    /// A model-backed scorer reached over the external-LF protocol.
    External {
        endpoint: String,
        #[serde(default)]
        min_confidence: f64,
        #[serde(default = "default_retries")]
        retries: u32,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_regex_confidence() -> f64 {
    1.0
}
fn default_similarity_threshold() -> f64 {
    0.5
}
fn default_retries() -> u32 {
    2
}
fn default_timeout_ms() -> u64 {
    30_000
}

impl LfSpec {
    pub fn kind(&self) -> LfKind {
        match self {
            LfSpec::Keyword => LfKind::Keyword,
            LfSpec::Regex { .. } => LfKind::Regex,
            LfSpec::Similarity { .. } => LfKind::Similarity,
            LfSpec::External { .. } => LfKind::External,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LfConfig {
    pub lf_id: String,
    pub spec: LfSpec,
}

/// Which items are routed to a human.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DeferralPolicy {
    /// Every item goes to a human.
    None,
    /// The `ceil(q * N)` lowest-confidence items go to a human.
    Budget(f64),
    /// Items with confidence strictly below the threshold go to a human.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub variables: Vec<VariableSchema>,
    pub k: usize,
    pub merge_overlap_threshold: f64,
    pub alpha: f64,
    pub deferral: Option<DeferralPolicy>,
    pub lf_configs: Vec<LfConfig>,
    pub dependency_pairs: Vec<(String, String)>,
    pub seed: u64,
    pub solver: SolverParams,
}

pub const DEFAULT_K: usize = 1;
pub const DEFAULT_MERGE_OVERLAP: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 100.0;
pub const DEFAULT_SEED: u64 = 0;

impl ProjectConfig {
    /// A configuration with default knobs and no labeling functions.
    pub fn new(variables: Vec<VariableSchema>) -> Self {
        Self {
            variables,
            k: DEFAULT_K,
            merge_overlap_threshold: DEFAULT_MERGE_OVERLAP,
            alpha: DEFAULT_ALPHA,
            deferral: None,
            lf_configs: Vec::new(),
            dependency_pairs: Vec::new(),
            seed: DEFAULT_SEED,
            solver: SolverParams::default(),
        }
    }

    pub fn variable(&self, variable_id: &str) -> Option<&VariableSchema> {
        self.variables.iter().find(|v| v.variable_id == variable_id)
    }

    pub fn lf(&self, lf_id: &str) -> Option<&LfConfig> {
        self.lf_configs.iter().find(|l| l.lf_id == lf_id)
    }

    /// LF ids in declaration order; this is the column order of every λ matrix.
    pub fn lf_roster(&self) -> Vec<String> {
        self.lf_configs.iter().map(|l| l.lf_id.clone()).collect()
    }

    pub fn has_external_lf(&self) -> bool {
        self.lf_configs.iter().any(|l| l.spec.kind() == LfKind::External)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{key}: {message}")]
pub struct ValidationError {
    /// The offending key, e.g. `variables[victim_sex].keywords.Unknown`.
    pub key: String,
    pub message: String,
}

impl ValidationError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

fn in_unit_open_closed(x: f64) -> bool {
    x > 0.0 && x <= 1.0
}

fn in_unit_closed(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Checks every invariant of the project types.
pub fn validate(config: &ProjectConfig) -> Result<(), ValidationError> {
    if config.variables.is_empty() {
        return Err(ValidationError::new("variables", "no variables"));
    }
    let mut variable_ids = BTreeSet::new();
    let mut question_owner: BTreeMap<&str, &str> = BTreeMap::new();
    for var in &config.variables {
        validate_variable(var, config.has_external_lf())?;
        if !variable_ids.insert(var.variable_id.as_str()) {
            return Err(ValidationError::new(
                format!("variables[{}]", var.variable_id),
                "duplicate variable id",
            ));
        }
        for q in &var.questions {
            if let Some(owner) = question_owner.insert(q.as_str(), var.variable_id.as_str()) {
                if owner != var.variable_id {
                    return Err(ValidationError::new(
                        format!("questions[{}]", var.variable_id),
                        format!("question {q:?} is already owned by variable {owner}"),
                    ));
                }
                return Err(ValidationError::new(
                    format!("questions[{}]", var.variable_id),
                    format!("duplicate question {q:?}"),
                ));
            }
        }
    }

    if config.k < 1 {
        return Err(ValidationError::new("k", "must be at least 1"));
    }
    if !in_unit_open_closed(config.merge_overlap_threshold) {
        return Err(ValidationError::new("merge_overlap_threshold", "must lie in (0, 1]"));
    }
    if !(config.alpha.is_finite() && config.alpha >= 0.0) {
        return Err(ValidationError::new("alpha", "must be a finite non-negative number"));
    }
    match config.deferral {
        Some(DeferralPolicy::Budget(q)) if !in_unit_closed(q) => {
            return Err(ValidationError::new("deferral.budget", "must lie in [0, 1]"));
        }
        Some(DeferralPolicy::Threshold(t)) if !in_unit_closed(t) => {
            return Err(ValidationError::new("deferral.threshold", "must lie in [0, 1]"));
        }
        _ => {}
    }
    config
        .solver
        .validate()
        .map_err(|msg| ValidationError::new("solver", msg))?;

    let mut lf_ids = BTreeSet::new();
    for lf in &config.lf_configs {
        let key = format!("labeling_functions[{}]", lf.lf_id);
        if lf.lf_id.is_empty() {
            return Err(ValidationError::new("labeling_functions", "empty lf id"));
        }
        if !lf_ids.insert(lf.lf_id.as_str()) {
            return Err(ValidationError::new(key, "duplicate lf id"));
        }
        match &lf.spec {
            LfSpec::Keyword => {
                if config.variables.iter().all(|v| v.keyword_count() == 0) {
                    return Err(ValidationError::new(key, "keyword LF declared but no keywords defined"));
                }
            }
            LfSpec::Regex { variable_id, value, pattern, confidence } => {
                let var = config.variable(variable_id).ok_or_else(|| {
                    ValidationError::new(format!("{key}.variable_id"), format!("unknown variable {variable_id}"))
                })?;
                if !var.has_value(value) {
                    return Err(ValidationError::new(
                        format!("{key}.value"),
                        format!("{value} is not a label value of {variable_id}"),
                    ));
                }
                if pattern.is_empty() {
                    return Err(ValidationError::new(format!("{key}.pattern"), "empty pattern"));
                }
                if !in_unit_closed(*confidence) {
                    return Err(ValidationError::new(format!("{key}.confidence"), "must lie in [0, 1]"));
                }
            }
            LfSpec::Similarity { threshold } => {
                if !(*threshold > 0.0 && *threshold < 1.0) {
                    return Err(ValidationError::new(format!("{key}.threshold"), "must lie in (0, 1)"));
                }
            }
            LfSpec::External { endpoint, min_confidence, .. } => {
                if endpoint.is_empty() {
                    return Err(ValidationError::new(format!("{key}.endpoint"), "empty endpoint"));
                }
                if !in_unit_closed(*min_confidence) {
                    return Err(ValidationError::new(format!("{key}.min_confidence"), "must lie in [0, 1]"));
                }
            }
        }
    }
    for (a, b) in &config.dependency_pairs {
        for id in [a, b] {
            if !lf_ids.contains(id.as_str()) {
                return Err(ValidationError::new(
                    "dependency_pairs",
                    format!("unknown labeling function {id}"),
                ));
            }
        }
        if a == b {
            return Err(ValidationError::new("dependency_pairs", format!("self pair {a}")));
        }
    }
    Ok(())
}

fn validate_variable(var: &VariableSchema, has_external: bool) -> Result<(), ValidationError> {
    let key = format!("variables[{}]", var.variable_id);
    if var.variable_id.is_empty() {
        return Err(ValidationError::new("variables", "empty variable id"));
    }
    if var.label_values.is_empty() {
        return Err(ValidationError::new(format!("{key}.values"), "at least one label value required"));
    }
    let mut seen = BTreeSet::new();
    for v in &var.label_values {
        if !seen.insert(v.as_str()) {
            return Err(ValidationError::new(format!("{key}.values"), format!("duplicate value {v}")));
        }
    }
    if let Some(neg) = &var.negative_value {
        if !var.has_value(neg) {
            return Err(ValidationError::new(
                format!("{key}.negative_value"),
                format!("{neg} is not a label value"),
            ));
        }
    }
    for value in var.keywords.keys() {
        if !var.has_value(value) {
            return Err(ValidationError::new(
                format!("{key}.keywords.{value}"),
                format!("{value} is not a label value"),
            ));
        }
    }
    if var.questions.is_empty() && var.keyword_count() == 0 && !has_external {
        return Err(ValidationError::new(
            format!("{key}.questions"),
            "no questions, no keywords and no external labeling function",
        ));
    }
    Ok(())
}

/// Deterministic plain-text listing of variables and the LF roster.
pub fn schema_summary(config: &ProjectConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "project: {} variable{}, {} labeling function{}, k={}, merge_overlap_threshold={}, alpha={}, seed={}",
        config.variables.len(),
        plural(config.variables.len()),
        config.lf_configs.len(),
        plural(config.lf_configs.len()),
        config.k,
        config.merge_overlap_threshold,
        config.alpha,
        config.seed,
    );
    out.push_str("variables:\n");
    for var in &config.variables {
        let _ = write!(
            out,
            "  {} ({}): {} value{} [{}], {} question{}, {} keyword{}",
            var.variable_id,
            var.display_name,
            var.label_values.len(),
            plural(var.label_values.len()),
            var.label_values.join(", "),
            var.questions.len(),
            plural(var.questions.len()),
            var.keyword_count(),
            plural(var.keyword_count()),
        );
        if let Some(neg) = &var.negative_value {
            let _ = write!(out, ", no evidence = {neg}");
        }
        out.push('\n');
    }
    if !config.lf_configs.is_empty() {
        out.push_str("labeling functions:\n");
        for lf in &config.lf_configs {
            let _ = writeln!(out, "  {}: {}", lf.lf_id, lf.spec.kind().as_str());
        }
    }
    if !config.dependency_pairs.is_empty() {
        let pairs: Vec<String> = config
            .dependency_pairs
            .iter()
            .map(|(a, b)| format!("{a}~{b}"))
            .collect();
        let _ = writeln!(out, "dependent pairs: {}", pairs.join(", "));
    }
    out
}

fn plural(n: usize) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}

/// Convenience constructor used throughout tests and fixtures.
pub fn variable(id: &str, values: &[&str]) -> VariableSchema {
    VariableSchema {
        variable_id: id.to_string(),
        display_name: id.to_string(),
        label_values: values.iter().map(|v| v.to_string()).collect(),
        negative_value: None,
        questions: Vec::new(),
        keywords: BTreeMap::new(),
    }
}
