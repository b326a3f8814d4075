use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::labeling::{Candidate, ExplanationGroup};

pub const CALIBRATION_BINS: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinStat {
    pub total: u32,
    pub confirmed: u32,
}

/// A raw score from one LF and whether the annotator confirmed the value it
/// nominated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub lf_id: String,
    pub raw_score: f64,
    pub confirmed: bool,
}

/// Histogram-binning calibration, one set of equal-width bins per LF.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    pub bins: BTreeMap<String, [BinStat; CALIBRATION_BINS]>,
}

fn bin_of(raw: f64) -> usize {
    let b = libm::floor(raw.clamp(0.0, 1.0) * CALIBRATION_BINS as f64) as usize;
    b.min(CALIBRATION_BINS - 1)
}

impl CalibrationMap {
    /// Empirical precision of `raw`'s bin, or `None` for an empty bin.
    pub fn precision(&self, lf_id: &str, raw: f64) -> Option<f64> {
        let stat = self.bins.get(lf_id)?[bin_of(raw)];
        (stat.total > 0).then(|| f64::from(stat.confirmed) / f64::from(stat.total))
    }
}

pub fn calibrate(observations: &[Observation]) -> CalibrationMap {
    let mut map = CalibrationMap::default();
    for o in observations {
        let stat = &mut map.bins.entry(o.lf_id.clone()).or_default()[bin_of(o.raw_score)];
        stat.total += 1;
        stat.confirmed += u32::from(o.confirmed);
    }
    map
}

/// Keyword candidates carry no model score and are left alone.
pub fn apply_calibration(map: &CalibrationMap, candidate: &Candidate) -> Candidate {
    let mut out = candidate.clone();
    if !candidate.is_uncalibrated() {
        if let Some(p) = map.precision(&candidate.lf_id, candidate.raw_score) {
            out.confidence = p;
        }
    }
    out
}

/// One observation per scored member of every decided group.
pub fn observations_from_decisions<'a>(
    decided: impl IntoIterator<Item = (&'a ExplanationGroup, bool)>,
) -> Vec<Observation> {
    decided
        .into_iter()
        .flat_map(|(g, confirmed)| {
            g.members.iter().filter(|c| !c.is_uncalibrated()).map(move |c| Observation {
                lf_id: c.lf_id.clone(),
                raw_score: c.raw_score,
                confirmed,
            })
        })
        .collect()
}
