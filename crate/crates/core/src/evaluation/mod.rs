//! Metrics, simulated annotators and deferral sweeps.

mod agreement;
mod simulate;
pub mod synthetic;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Span;
use crate::session::{ItemKey, ValidationRecord};

pub use agreement::{annotator_agreement, AgreementReport};
pub use simulate::{deferral_curve, recall_at_k, simulate_annotator, CurvePoint, DEFAULT_ANNOTATOR_ACCURACY};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub doc_id: String,
    pub variable_id: String,
    pub value: String,
    /// Text that supports the value, when known. A simulated annotator only
    /// confirms groups whose span overlaps it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Span>,
}

impl GoldLabel {
    pub fn key(&self) -> ItemKey {
        ItemKey::new(self.doc_id.clone(), self.variable_id.clone())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluationError {
    #[error("prediction and gold keys differ at {doc_id}/{variable_id}")]
    KeyMismatch { doc_id: String, variable_id: String },
    #[error("duplicate gold label for {doc_id}/{variable_id}")]
    DuplicateGold { doc_id: String, variable_id: String },
    #[error("annotators share no validated cells")]
    NoOverlap,
    #[error("need at least two annotators")]
    TooFewAnnotators,
    #[error("empty policy grid")]
    EmptyGrid,
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error(transparent)]
    Session(#[from] crate::session::SessionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No predictions of this class, so precision is reported as 0.
    pub precision_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMetrics {
    pub variable_id: String,
    pub support: usize,
    pub abstentions: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Some supported class had no predictions.
    pub precision_undefined: bool,
    pub classes: Vec<ClassMetrics>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub records: usize,
    pub total_ms: u64,
    pub mean_ms: f64,
    pub median_ms: f64,
    /// Mean total time spent per document.
    pub per_document_mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub variables: Vec<VariableMetrics>,
    /// Support-weighted over variables.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Unweighted mean over variables.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub timing: Option<TimingSummary>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Indexes gold labels by item, rejecting duplicates.
pub fn gold_index(gold: &[GoldLabel]) -> Result<BTreeMap<ItemKey, &GoldLabel>, EvaluationError> {
    let mut out = BTreeMap::new();
    for g in gold {
        if out.insert(g.key(), g).is_some() {
            return Err(EvaluationError::DuplicateGold { doc_id: g.doc_id.clone(), variable_id: g.variable_id.clone() });
        }
    }
    Ok(out)
}

/// Per-class precision and recall averaged with class-support weights.
///
/// `None` predictions are abstentions: a false negative for the gold class
/// and no false positive. Classes never predicted get precision 0 and a
/// flag.
pub fn weighted_precision_recall(
    predictions: &BTreeMap<ItemKey, Option<String>>,
    gold: &[GoldLabel],
) -> Result<MetricReport, EvaluationError> {
    let gold = gold_index(gold)?;
    let mismatch = predictions
        .keys()
        .find(|k| !gold.contains_key(*k))
        .or_else(|| gold.keys().find(|k| !predictions.contains_key(*k)));
    if let Some(k) = mismatch {
        return Err(EvaluationError::KeyMismatch { doc_id: k.doc_id.clone(), variable_id: k.variable_id.clone() });
    }

    let mut per_var: BTreeMap<&str, Vec<(&str, Option<&str>)>> = BTreeMap::new();
    for (k, g) in &gold {
        per_var.entry(k.variable_id.as_str()).or_default().push((g.value.as_str(), predictions[k].as_deref()));
    }

    let variables: Vec<VariableMetrics> = per_var.into_iter().map(|(v, pairs)| variable_metrics(v, &pairs)).collect();
    let total: usize = variables.iter().map(|v| v.support).sum();
    let weighted = |f: fn(&VariableMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            variables.iter().map(|v| f(v) * v.support as f64).sum::<f64>() / total as f64
        }
    };
    let mean = |f: fn(&VariableMetrics) -> f64| {
        if variables.is_empty() {
            0.0
        } else {
            variables.iter().map(f).sum::<f64>() / variables.len() as f64
        }
    };
    Ok(MetricReport {
        precision: weighted(|v| v.precision),
        recall: weighted(|v| v.recall),
        f1: weighted(|v| v.f1),
        macro_precision: mean(|v| v.precision),
        macro_recall: mean(|v| v.recall),
        variables,
        timing: None,
    })
}

fn variable_metrics(variable_id: &str, pairs: &[(&str, Option<&str>)]) -> VariableMetrics {
    let classes: BTreeSet<&str> = pairs.iter().flat_map(|(g, p)| core::iter::once(*g).chain(*p)).collect();
    let support = pairs.len();
    let mut out = VariableMetrics {
        variable_id: variable_id.into(),
        support,
        abstentions: pairs.iter().filter(|(_, p)| p.is_none()).count(),
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        precision_undefined: false,
        classes: Vec::new(),
    };
    for c in classes {
        let tp = pairs.iter().filter(|(g, p)| *g == c && *p == Some(c)).count();
        let fp = pairs.iter().filter(|(g, p)| *g != c && *p == Some(c)).count();
        let fn_ = pairs.iter().filter(|(g, p)| *g == c && *p != Some(c)).count();
        let class_support = tp + fn_;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, class_support).unwrap_or(0.0);
        let p = precision.unwrap_or(0.0);
        let m = ClassMetrics {
            class: c.into(),
            tp,
            fp,
            fn_,
            support: class_support,
            precision: p,
            recall,
            f1: f1(p, recall),
            precision_undefined: precision.is_none(),
        };
        if class_support > 0 {
            let w = class_support as f64 / support as f64;
            out.precision += w * m.precision;
            out.recall += w * m.recall;
            out.f1 += w * m.f1;
            out.precision_undefined |= m.precision_undefined;
        }
        out.classes.push(m);
    }
    out
}

/// Wall-time summary over validation records.
pub fn timing_summary(records: &[ValidationRecord]) -> TimingSummary {
    if records.is_empty() {
        return TimingSummary::default();
    }
    let mut times: Vec<u64> = records.iter().map(|r| r.wall_time_ms).collect();
    times.sort_unstable();
    let n = times.len();
    let median = if n % 2 == 1 { times[n / 2] as f64 } else { (times[n / 2 - 1] + times[n / 2]) as f64 / 2.0 };
    let total: u64 = times.iter().sum();
    let docs: BTreeSet<&str> = records.iter().map(|r| r.doc_id.as_str()).collect();
    TimingSummary {
        records: n,
        total_ms: total,
        mean_ms: total as f64 / n as f64,
        median_ms: median,
        per_document_mean_ms: total as f64 / docs.len() as f64,
    }
}

/// Spearman rank correlation; ties get their average rank.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = alloc::vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / libm::sqrt(va * vb)
    }
}
