use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gold_index, weighted_precision_recall, EvaluationError, GoldLabel};
use crate::labeling::ExplanationGroup;
use crate::schema::DeferralPolicy;
use crate::session::{Decision, ItemStatus, SessionState, ValidationRecord};

/// 255 of 260 decisions correct in the reference user study, rounded.
pub const DEFAULT_ANNOTATOR_ACCURACY: f64 = 0.98;

const SIMULATED_ANNOTATOR: &str = "simulated";

fn supports(group: &ExplanationGroup, gold: &GoldLabel) -> bool {
    group.value == gold.value && gold.evidence.as_ref().map_or(true, |e| group.merged_span.intersection_len(e) > 0)
}

/// Decisions of a simulated annotator on every item still awaiting a human.
///
/// For each item the annotator walks the ranked groups. A group that
/// supports the gold value is confirmed with probability `p` (otherwise
/// wrongly rejected); any other group is rejected with probability `p`
/// (otherwise wrongly confirmed). The walk stops at the first confirm; if
/// the groups run out the annotator records no evidence. Items without a
/// gold label are skipped.
pub fn simulate_annotator(
    state: &SessionState,
    gold: &[GoldLabel],
    p: f64,
    seed: u64,
    annotator_id: &str,
) -> Result<Vec<ValidationRecord>, EvaluationError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(EvaluationError::InvalidProbability(p));
    }
    let gold = gold_index(gold)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for key in state.keys() {
        let Some(g) = gold.get(&key) else { continue };
        let item = state.item(&key).expect("key from roster");
        if matches!(item.status, ItemStatus::AutoAccepted) || state.terminal_decision(&key, annotator_id).is_some() {
            continue;
        }
        let mut record = |group_id: Option<&str>, decision: Decision| {
            out.push(ValidationRecord {
                record_id: format!("sim-{seed}-{annotator_id}-{}", state.validations.len() + out.len()),
                doc_id: key.doc_id.clone(),
                variable_id: key.variable_id.clone(),
                group_id: group_id.map(Into::into),
                decision,
                annotator_id: annotator_id.into(),
                wall_time_ms: 0,
                timestamp: 0,
            });
        };
        let mut confirmed = false;
        for group in state.ranked_groups(&key) {
            let correct = rng.gen_bool(p);
            if supports(group, g) == correct {
                record(Some(&group.group_id), Decision::Confirm);
                confirmed = true;
                break;
            }
            record(Some(&group.group_id), Decision::Reject);
        }
        if !confirmed {
            record(None, Decision::NoEvidence);
        }
    }
    Ok(out)
}

/// Fraction of gold items a perfect annotator gets right: a supporting
/// group is among the ranked groups, or the gold value is the variable's
/// no-evidence value.
pub fn recall_at_k(state: &SessionState, gold: &[GoldLabel]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    let hits = gold
        .iter()
        .filter(|g| {
            let no_evidence = state.variable(&g.variable_id).is_some_and(|v| v.no_evidence_value() == g.value);
            no_evidence || state.ranked_groups(&g.key()).iter().any(|grp| supports(grp, g))
        })
        .count();
    hits as f64 / gold.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub budget: f64,
    pub deferred: usize,
    pub deferred_fraction: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision and recall as the deferral budget varies. Every grid point
/// starts from `state`, defers with a budget, lets a simulated annotator
/// (seeded identically at each point) resolve the human items and scores
/// the result against `gold`.
pub fn deferral_curve(
    state: &SessionState,
    gold: &[GoldLabel],
    budgets: &[f64],
    p: f64,
    seed: u64,
) -> Result<Vec<CurvePoint>, EvaluationError> {
    if budgets.is_empty() {
        return Err(EvaluationError::EmptyGrid);
    }
    budgets
        .iter()
        .map(|&q| {
            let mut s = state.clone();
            let plan = s.plan_deferral(DeferralPolicy::Budget(q))?;
            for r in simulate_annotator(&s, gold, p, seed, SIMULATED_ANNOTATOR)? {
                s.submit_validation(r)?;
            }
            let finals = s.final_values();
            let predictions: BTreeMap<_, _> =
                gold.iter().map(|g| (g.key(), finals.get(&g.key()).cloned().flatten())).collect();
            let m = weighted_precision_recall(&predictions, gold)?;
            let n = plan.human.len() + plan.auto.len();
            Ok(CurvePoint {
                budget: q,
                deferred: plan.human.len(),
                deferred_fraction: if n == 0 { 0.0 } else { plan.human.len() as f64 / n as f64 },
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
            })
        })
        .collect()
}
