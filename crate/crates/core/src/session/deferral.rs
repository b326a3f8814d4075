use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ItemKey;
use crate::schema::DeferralPolicy;

/// Slack for `q * N` landing a hair above an integer.
const BUDGET_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeferralPlan {
    pub human: Vec<ItemKey>,
    pub auto: Vec<ItemKey>,
}

/// Number of items a budget of `q` sends to a human out of `n`.
pub fn budget_size(q: f64, n: usize) -> usize {
    let raw = libm::ceil(q * n as f64 - BUDGET_EPSILON);
    (raw.max(0.0) as usize).min(n)
}

/// Splits items into human and automatic sets. `predictions` must be in
/// document order, which breaks confidence ties; both output lists keep
/// that order.
pub fn plan_deferral(predictions: &[(ItemKey, f64)], policy: &DeferralPolicy) -> DeferralPlan {
    let mut to_human = alloc::vec![false; predictions.len()];
    match *policy {
        DeferralPolicy::None => to_human.iter_mut().for_each(|h| *h = true),
        DeferralPolicy::Threshold(tau) => {
            for (h, (_, c)) in to_human.iter_mut().zip(predictions) {
                *h = *c < tau;
            }
        }
        DeferralPolicy::Budget(q) => {
            let mut order: Vec<usize> = (0..predictions.len()).collect();
            order.sort_by(|&a, &b| predictions[a].1.total_cmp(&predictions[b].1).then(a.cmp(&b)));
            for &i in order.iter().take(budget_size(q, predictions.len())) {
                to_human[i] = true;
            }
        }
    }
    let mut plan = DeferralPlan::default();
    for ((key, _), h) in predictions.iter().zip(to_human) {
        if h {
            plan.human.push(key.clone());
        } else {
            plan.auto.push(key.clone());
        }
    }
    plan
}
