use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::{LabelModelError, LabelModelFit, LambdaMatrix};
use crate::labeling::ExplanationGroup;

/// Numerically stable logistic function.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Probability that a λ row's value is correct under `fit`:
/// `σ(Σ_k w_k λ_k)`.
pub fn predict_proba(fit: &LabelModelFit, row: &[i8]) -> Result<f64, LabelModelError> {
    if row.len() != fit.weights.len() {
        return Err(LabelModelError::DimensionMismatch { expected: fit.weights.len(), got: row.len() });
    }
    let s: f64 = row.iter().zip(&fit.weights).map(|(&l, w)| w * f64::from(l)).sum();
    Ok(logistic(s))
}

/// Sets `group_confidence` on each group.
///
/// Groups present in `lambda` are scored by the fit; everything else (and
/// everything when there is no fit) falls back to mean member confidence.
pub fn score_groups(
    fit: Option<&LabelModelFit>,
    lambda: &LambdaMatrix,
    groups: &mut [ExplanationGroup],
) -> Result<(), LabelModelError> {
    for g in groups.iter_mut() {
        g.group_confidence = match (fit, lambda.row_of(&g.group_id)) {
            (Some(fit), Some(r)) => predict_proba(fit, lambda.row(r))?,
            _ => g.mean_member_confidence(),
        };
    }
    Ok(())
}

/// Presentation order: confidence, then agreement, descending; ties go to
/// the earlier span.
pub fn rank_explanations(groups: &[ExplanationGroup]) -> Vec<ExplanationGroup> {
    let mut ranked = groups.to_vec();
    ranked.sort_by(|a, b| {
        b.group_confidence
            .total_cmp(&a.group_confidence)
            .then(b.agreement.cmp(&a.agreement))
            .then(a.merged_span.start.cmp(&b.merged_span.start))
            .then_with(|| a.group_id.cmp(&b.group_id))
    });
    ranked
}

/// Value nominated by the most distinct labeling functions; ties go to the
/// value with the earliest span. Without any groups the negative value (if
/// any) is returned.
pub fn majority_rule(groups: &[ExplanationGroup], negative_value: Option<&str>) -> Option<String> {
    let mut tally: BTreeMap<&str, (Vec<&str>, usize)> = BTreeMap::new();
    for g in groups {
        let entry = tally.entry(g.value.as_str()).or_insert_with(|| (Vec::new(), usize::MAX));
        entry.0.extend(g.members.iter().map(|c| c.lf_id.as_str()));
        entry.1 = entry.1.min(g.merged_span.start);
    }
    tally
        .into_iter()
        .map(|(value, (mut lfs, start))| {
            lfs.sort_unstable();
            lfs.dedup();
            (value, lfs.len(), start)
        })
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)).then(b.0.cmp(a.0)))
        .map(|(v, _, _)| String::from(v))
        .or_else(|| negative_value.map(String::from))
}
