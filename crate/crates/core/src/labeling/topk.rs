use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::Candidate;
use crate::schema::LfKind;

fn by_confidence(a: &Candidate, b: &Candidate) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.span.start.cmp(&b.span.start))
        .then(a.span.end.cmp(&b.span.end))
}

/// Keeps the `k` most confident candidates of every (document, LF, variable,
/// value); keyword hits pass through untouched. Ties go to the earlier span.
///
/// Output order: document, variable, value, descending confidence, span
/// start, then LF id.
pub fn select_top_k(candidates: &[Candidate], k: usize) -> Vec<Candidate> {
    let k = k.max(1);
    let mut buckets: BTreeMap<(&str, &str, &str, &str), Vec<&Candidate>> = BTreeMap::new();
    for c in candidates {
        buckets
            .entry((c.span.doc_id.as_str(), c.lf_id.as_str(), c.variable_id.as_str(), c.value.as_str()))
            .or_default()
            .push(c);
    }
    let mut out: Vec<Candidate> = Vec::with_capacity(candidates.len());
    for (_, mut group) in buckets {
        group.sort_by(|a, b| by_confidence(a, b));
        let keep = if group[0].lf_kind == LfKind::Keyword { group.len() } else { k.min(group.len()) };
        out.extend(group.into_iter().take(keep).cloned());
    }
    out.sort_by(|a, b| {
        a.span
            .doc_id
            .cmp(&b.span.doc_id)
            .then_with(|| a.variable_id.cmp(&b.variable_id))
            .then_with(|| a.value.cmp(&b.value))
            .then_with(|| by_confidence(a, b))
            .then_with(|| a.lf_id.cmp(&b.lf_id))
    });
    out
}
