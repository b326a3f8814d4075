use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Candidate, ExplanationGroup};
use crate::corpus::Span;
use crate::text::fnv1a64;

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index becomes the root so components are labelled stably
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Stable id of a group: a hash of its document, variable, value and the
/// `(lf, start, end)` of every member. Confidences do not enter the id, so
/// a refit keeps ids while a new nomination produces a new one.
pub(crate) fn group_id(doc_id: &str, variable_id: &str, value: &str, members: &[Candidate]) -> String {
    let mut parts: Vec<String> = Vec::with_capacity(members.len() + 3);
    parts.push(doc_id.to_string());
    parts.push(variable_id.to_string());
    parts.push(value.to_string());
    for m in members {
        parts.push(format!("{}@{}-{}", m.lf_id, m.span.start, m.span.end));
    }
    format!("g{:016x}", fnv1a64(parts.iter().map(|p| p.as_bytes())))
}

/// Merges same-value candidates whose spans overlap.
///
/// Within each (document, variable, value), candidates are linked when the
/// Jaccard overlap of their character spans is at least `overlap_threshold`;
/// each connected component becomes one group. Groups are ordered by
/// document, variable, then smallest member start.
pub fn merge_candidates(candidates: &[Candidate], overlap_threshold: f64) -> Vec<ExplanationGroup> {
    let mut buckets: BTreeMap<(&str, &str, &str), Vec<&Candidate>> = BTreeMap::new();
    for c in candidates {
        buckets
            .entry((c.span.doc_id.as_str(), c.variable_id.as_str(), c.value.as_str()))
            .or_default()
            .push(c);
    }

    let mut groups = Vec::new();
    for ((doc_id, variable_id, value), members) in buckets {
        let mut sets = DisjointSet::new(members.len());
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                if members[i].span.jaccard(&members[j].span) >= overlap_threshold {
                    sets.union(i, j);
                }
            }
        }
        let mut components: BTreeMap<usize, Vec<Candidate>> = BTreeMap::new();
        for (i, m) in members.iter().enumerate() {
            let root = sets.find(i);
            components.entry(root).or_default().push((*m).clone());
        }
        for (_, mut members) in components {
            members.sort_by(|a, b| {
                a.span
                    .start
                    .cmp(&b.span.start)
                    .then(a.span.end.cmp(&b.span.end))
                    .then_with(|| a.lf_id.cmp(&b.lf_id))
                    .then(b.confidence.total_cmp(&a.confidence))
            });
            let start = members.iter().map(|m| m.span.start).min().unwrap_or(0);
            let end = members.iter().map(|m| m.span.end).max().unwrap_or(0);
            let mut lfs: Vec<&str> = members.iter().map(|m| m.lf_id.as_str()).collect();
            lfs.sort_unstable();
            lfs.dedup();
            let agreement = lfs.len();
            groups.push(ExplanationGroup {
                group_id: group_id(doc_id, variable_id, value, &members),
                doc_id: doc_id.to_string(),
                variable_id: variable_id.to_string(),
                value: value.to_string(),
                merged_span: Span::new(doc_id, start, end),
                agreement,
                group_confidence: 0.0,
                members,
            });
        }
    }
    groups.sort_by(|a, b| {
        a.doc_id
            .cmp(&b.doc_id)
            .then_with(|| a.variable_id.cmp(&b.variable_id))
            .then(a.merged_span.start.cmp(&b.merged_span.start))
            .then_with(|| a.value.cmp(&b.value))
            .then(a.merged_span.end.cmp(&b.merged_span.end))
            .then_with(|| a.group_id.cmp(&b.group_id))
    });
    groups
}
