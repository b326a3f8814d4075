//! YAML project files.
//!
//! A project is one file naming three schema documents (categories,
//! questions, keywords) plus the run configuration:
//!
//! ```yaml
//! schemas:
//!   categories: categories.yaml
//!   questions: questions.yaml
//!   keywords: keywords.yaml
//! k: 3
//! merge_overlap_threshold: 0.5
//! alpha: 100
//! seed: 0
//! deferral: {budget: 0.4}
//! labeling_functions:
//!   - {id: kw, kind: keyword}
//!   - {id: sim, kind: similarity, threshold: 0.3}
//! dependency_pairs: [[kw, sim]]
//! ```
//!
//! Schema paths are relative to the project file. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use elicit_core::schema::{validate, LfKind, ValidationError};
use elicit_core::{DeferralPolicy, LfConfig, LfSpec, ProjectConfig, SolverParams, VariableSchema};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ProjectError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProject {
    schemas: SchemaFiles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    merge_overlap_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deferral: Option<RawDeferral>,
    #[serde(default)]
    labeling_functions: Vec<RawLf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    dependency_pairs: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver: Option<SolverParams>,
}

/// `none`, `{budget: q}` or `{threshold: t}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawDeferral {
    Named(String),
    Budget { budget: f64 },
    Threshold { threshold: f64 },
}

impl RawDeferral {
    fn policy(self) -> Result<DeferralPolicy, ProjectError> {
        match self {
            RawDeferral::Named(n) if n == "none" => Ok(DeferralPolicy::None),
            RawDeferral::Named(n) => Err(invalid("deferral", format!("unknown policy {n:?}"))),
            RawDeferral::Budget { budget } => Ok(DeferralPolicy::Budget(budget)),
            RawDeferral::Threshold { threshold } => Ok(DeferralPolicy::Threshold(threshold)),
        }
    }

    fn from_policy(p: DeferralPolicy) -> Self {
        match p {
            DeferralPolicy::None => RawDeferral::Named("none".into()),
            DeferralPolicy::Budget(budget) => RawDeferral::Budget { budget },
            DeferralPolicy::Threshold(threshold) => RawDeferral::Threshold { threshold },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFiles {
    categories: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    questions: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keywords: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLf {
    id: String,
    kind: LfKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variable: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    retries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timeout_ms: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Categories {
    variables: Vec<RawCategory>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCategory {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    values: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    negative_value: Option<String>,
}

type Questions = BTreeMap<String, Vec<String>>;
type Keywords = BTreeMap<String, BTreeMap<String, Vec<String>>>;

fn read(path: &Path) -> Result<String, ProjectError> {
    fs::read_to_string(path).map_err(|source| ProjectError::Io { path: path.to_owned(), source })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, ProjectError> {
    serde_yaml::from_str(text).map_err(|e| {
        let (line, column) = e.location().map_or((0, 0), |l| (l.line(), l.column()));
        ProjectError::Parse { path: path.to_owned(), line, column, message: e.to_string() }
    })
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> ProjectError {
    ProjectError::Validation(ValidationError { key: key.into(), message: message.into() })
}

/// Loads and validates a project file and the schema files it names.
pub fn load_project(path: impl AsRef<Path>) -> Result<ProjectConfig, ProjectError> {
    let path = path.as_ref();
    let raw: RawProject = parse(path, &read(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));

    let cat_path = base.join(&raw.schemas.categories);
    let categories: Categories = parse(&cat_path, &read(&cat_path)?)?;
    let questions: Questions = match &raw.schemas.questions {
        Some(p) => {
            let p = base.join(p);
            parse::<Option<Questions>>(&p, &read(&p)?)?.unwrap_or_default()
        }
        None => Questions::new(),
    };
    let keywords: Keywords = match &raw.schemas.keywords {
        Some(p) => {
            let p = base.join(p);
            parse::<Option<Keywords>>(&p, &read(&p)?)?.unwrap_or_default()
        }
        None => Keywords::new(),
    };
    let config = assemble(raw, categories, questions, keywords)?;
    validate(&config)?;
    Ok(config)
}

fn assemble(raw: RawProject, categories: Categories, mut questions: Questions, mut keywords: Keywords) -> Result<ProjectConfig, ProjectError> {
    let mut variables = Vec::with_capacity(categories.variables.len());
    for c in categories.variables {
        let kws = keywords.remove(&c.id).unwrap_or_default();
        variables.push(VariableSchema {
            display_name: c.name.unwrap_or_else(|| c.id.clone()),
            questions: questions.remove(&c.id).unwrap_or_default(),
            keywords: match_keyword_keys(&c.id, &c.values, kws)?,
            variable_id: c.id,
            label_values: c.values,
            negative_value: c.negative_value,
        });
    }
    if let Some(v) = questions.keys().next() {
        return Err(invalid(format!("questions.{v}"), "not a declared variable"));
    }
    if let Some(v) = keywords.keys().next() {
        return Err(invalid(format!("keywords.{v}"), "not a declared variable"));
    }

    let mut config = ProjectConfig::new(variables);
    config.k = raw.k.unwrap_or(config.k);
    config.merge_overlap_threshold = raw.merge_overlap_threshold.unwrap_or(config.merge_overlap_threshold);
    config.alpha = raw.alpha.unwrap_or(config.alpha);
    config.seed = raw.seed.unwrap_or(config.seed);
    config.deferral = raw.deferral.map(RawDeferral::policy).transpose()?;
    config.solver = raw.solver.unwrap_or_default();
    config.dependency_pairs = raw.dependency_pairs.into_iter().map(|[a, b]| (a, b)).collect();
    config.lf_configs = raw
        .labeling_functions
        .into_iter()
        .enumerate()
        .map(|(i, lf)| lf_config(i, lf))
        .collect::<Result<_, _>>()?;
    Ok(config)
}

/// Keyword keys name label values; a key that differs from exactly one
/// value only in case is mapped onto it.
fn match_keyword_keys(
    variable: &str,
    values: &[String],
    keywords: BTreeMap<String, Vec<String>>,
) -> Result<BTreeMap<String, Vec<String>>, ProjectError> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (key, kws) in keywords {
        let value = if values.contains(&key) {
            key
        } else {
            let mut hits = values.iter().filter(|v| v.to_lowercase() == key.to_lowercase());
            match (hits.next(), hits.next()) {
                (Some(v), None) => v.clone(),
                _ => return Err(invalid(format!("keywords.{variable}.{key}"), "not a label value of the variable")),
            }
        };
        out.entry(value).or_default().extend(kws);
    }
    Ok(out)
}

fn lf_config(i: usize, lf: RawLf) -> Result<LfConfig, ProjectError> {
    let key = |field: &str| format!("labeling_functions[{i}].{field}");
    let required = |v: Option<String>, field: &str| v.ok_or_else(|| invalid(key(field), format!("required for {} labeling functions", lf.kind.as_str())));
    let allowed: &[&str] = match lf.kind {
        LfKind::Keyword => &[],
        LfKind::Regex => &["variable", "value", "pattern", "confidence"],
        LfKind::Similarity => &["threshold"],
        LfKind::External => &["endpoint", "min_confidence", "retries", "timeout_ms"],
    };
    let present = [
        ("variable", lf.variable.is_some()),
        ("value", lf.value.is_some()),
        ("pattern", lf.pattern.is_some()),
        ("confidence", lf.confidence.is_some()),
        ("threshold", lf.threshold.is_some()),
        ("endpoint", lf.endpoint.is_some()),
        ("min_confidence", lf.min_confidence.is_some()),
        ("retries", lf.retries.is_some()),
        ("timeout_ms", lf.timeout_ms.is_some()),
    ];
    if let Some((field, _)) = present.iter().find(|(f, set)| *set && !allowed.contains(f)) {
        return Err(invalid(key(field), format!("not a {} labeling function parameter", lf.kind.as_str())));
    }
    let spec = match lf.kind {
        LfKind::Keyword => LfSpec::Keyword,
        LfKind::Regex => LfSpec::Regex {
            variable_id: required(lf.variable.clone(), "variable")?,
            value: required(lf.value.clone(), "value")?,
            pattern: required(lf.pattern.clone(), "pattern")?,
            confidence: lf.confidence.unwrap_or(1.0),
        },
        LfKind::Similarity => LfSpec::Similarity { threshold: lf.threshold.unwrap_or(0.5) },
        LfKind::External => LfSpec::External {
            endpoint: required(lf.endpoint.clone(), "endpoint")?,
            min_confidence: lf.min_confidence.unwrap_or(0.0),
            retries: lf.retries.unwrap_or(2),
            timeout_ms: lf.timeout_ms.unwrap_or(30_000),
        },
    };
    if let LfSpec::Regex { pattern, .. } = &spec {
        regex::Regex::new(pattern).map_err(|e| invalid(key("pattern"), e.to_string()))?;
    }
    Ok(LfConfig { lf_id: lf.id, spec })
}

/// Writes `config` as a project file plus three schema files into `dir`.
/// Loading the written project yields an equal configuration.
pub fn save_project(config: &ProjectConfig, dir: impl AsRef<Path>) -> Result<PathBuf, ProjectError> {
    let dir = dir.as_ref();
    let categories = Categories {
        variables: config
            .variables
            .iter()
            .map(|v| RawCategory {
                id: v.variable_id.clone(),
                name: Some(v.display_name.clone()),
                values: v.label_values.clone(),
                negative_value: v.negative_value.clone(),
            })
            .collect(),
    };
    let questions: Questions = config
        .variables
        .iter()
        .filter(|v| !v.questions.is_empty())
        .map(|v| (v.variable_id.clone(), v.questions.clone()))
        .collect();
    let keywords: Keywords = config
        .variables
        .iter()
        .filter(|v| !v.keywords.is_empty())
        .map(|v| (v.variable_id.clone(), v.keywords.clone()))
        .collect();
    let raw = RawProject {
        schemas: SchemaFiles {
            categories: "categories.yaml".into(),
            questions: Some("questions.yaml".into()),
            keywords: Some("keywords.yaml".into()),
        },
        k: Some(config.k),
        merge_overlap_threshold: Some(config.merge_overlap_threshold),
        alpha: Some(config.alpha),
        seed: Some(config.seed),
        deferral: config.deferral.map(RawDeferral::from_policy),
        labeling_functions: config.lf_configs.iter().map(raw_lf).collect(),
        dependency_pairs: config.dependency_pairs.iter().map(|(a, b)| [a.clone(), b.clone()]).collect(),
        solver: Some(config.solver),
    };
    write_yaml(&dir.join("categories.yaml"), &categories)?;
    write_yaml(&dir.join("questions.yaml"), &questions)?;
    write_yaml(&dir.join("keywords.yaml"), &keywords)?;
    let project = dir.join("project.yaml");
    write_yaml(&project, &raw)?;
    Ok(project)
}

fn raw_lf(lf: &LfConfig) -> RawLf {
    let mut raw = RawLf { id: lf.lf_id.clone(), kind: lf.spec.kind(), ..RawLf::default_for(lf.spec.kind()) };
    match &lf.spec {
        LfSpec::Keyword => {}
        LfSpec::Regex { variable_id, value, pattern, confidence } => {
            raw.variable = Some(variable_id.clone());
            raw.value = Some(value.clone());
            raw.pattern = Some(pattern.clone());
            raw.confidence = Some(*confidence);
        }
        LfSpec::Similarity { threshold } => raw.threshold = Some(*threshold),
        LfSpec::External { endpoint, min_confidence, retries, timeout_ms } => {
            raw.endpoint = Some(endpoint.clone());
            raw.min_confidence = Some(*min_confidence);
            raw.retries = Some(*retries);
            raw.timeout_ms = Some(*timeout_ms);
        }
    }
    raw
}

impl RawLf {
    fn default_for(kind: LfKind) -> Self {
        RawLf {
            id: String::new(),
            kind,
            variable: None,
            value: None,
            pattern: None,
            confidence: None,
            threshold: None,
            endpoint: None,
            min_confidence: None,
            retries: None,
            timeout_ms: None,
        }
    }
}

fn write_yaml<T: Serialize>(path: &Path, value: &T) -> Result<(), ProjectError> {
    let text = serde_yaml::to_string(value).map_err(|e| invalid(path.display().to_string(), e.to_string()))?;
    fs::write(path, text).map_err(|source| ProjectError::Io { path: path.to_owned(), source })
}
