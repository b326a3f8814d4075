use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::session::ItemKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub variable_id: String,
    /// Jointly validated cells, summed over annotator pairs.
    pub cells: usize,
    pub percent: f64,
    /// Cohen's kappa, averaged over annotator pairs.
    pub kappa: f64,
}

type Values = BTreeMap<ItemKey, Option<String>>;

fn cohen(pairs: &[(Option<&str>, Option<&str>)]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let agree = pairs.iter().filter(|(a, b)| a == b).count() as f64;
    let mut marg: BTreeMap<Option<&str>, (f64, f64)> = BTreeMap::new();
    for (a, b) in pairs {
        marg.entry(*a).or_default().0 += 1.0;
        marg.entry(*b).or_default().1 += 1.0;
    }
    let po = agree / n;
    let pe: f64 = marg.values().map(|(x, y)| (x / n) * (y / n)).sum();
    let kappa = if pe >= 1.0 {
        if po >= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (po - pe) / (1.0 - pe)
    };
    (po, kappa)
}

/// Percent agreement and Cohen's kappa per variable over cells validated by
/// both annotators of each pair.
pub fn annotator_agreement(annotators: &[Values]) -> Result<Vec<AgreementReport>, EvaluationError> {
    if annotators.len() < 2 {
        return Err(EvaluationError::TooFewAnnotators);
    }
    // variable -> per pair: (percent, kappa, cells)
    let mut stats: BTreeMap<&str, Vec<(f64, f64, usize)>> = BTreeMap::new();
    for i in 0..annotators.len() {
        for j in i + 1..annotators.len() {
            let mut by_var: BTreeMap<&str, Vec<(Option<&str>, Option<&str>)>> = BTreeMap::new();
            for (k, a) in &annotators[i] {
                if let Some(b) = annotators[j].get(k) {
                    by_var.entry(k.variable_id.as_str()).or_default().push((a.as_deref(), b.as_deref()));
                }
            }
            for (v, pairs) in by_var {
                let (po, kappa) = cohen(&pairs);
                stats.entry(v).or_default().push((po, kappa, pairs.len()));
            }
        }
    }
    if stats.is_empty() {
        return Err(EvaluationError::NoOverlap);
    }
    Ok(stats
        .into_iter()
        .map(|(v, s)| {
            let n = s.len() as f64;
            AgreementReport {
                variable_id: v.into(),
                cells: s.iter().map(|x| x.2).sum(),
                percent: s.iter().map(|x| x.0).sum::<f64>() / n,
                kappa: s.iter().map(|x| x.1).sum::<f64>() / n,
            }
        })
        .collect())
}
