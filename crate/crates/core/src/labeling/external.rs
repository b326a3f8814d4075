//! Wire types and response handling for model-backed labeling functions that
//! run out of process. Transport lives in the companion crate.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Candidate, LabelingError};
use crate::corpus::{Document, Span};
use crate::schema::{LfKind, VariableSchema};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub protocol_version: u32,
    pub doc_id: String,
    pub text: String,
    pub variable_id: String,
    pub label_values: Vec<String>,
    pub questions: Vec<String>,
    pub max_candidates: usize,
}

impl ScoreRequest {
    pub fn new(doc: &Document, schema: &VariableSchema, max_candidates: usize) -> Self {
        Self {
            protocol_version: PROTOCOL_VERSION,
            doc_id: doc.doc_id.clone(),
            text: doc.text.clone(),
            variable_id: schema.variable_id.clone(),
            label_values: schema.label_values.clone(),
            questions: schema.questions.clone(),
            max_candidates,
        }
    }
}

/// One scored span; offsets are character offsets into the request text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredSpan {
    pub start: usize,
    pub end: usize,
    pub value: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreResponse {
    pub candidates: Vec<ScoredSpan>,
}

/// Turns a scorer response into candidates.
///
/// Spans scoring below `min_confidence` are dropped and the `k` best spans
/// per value are kept. When nothing survives and the variable has a negative
/// value, a single whole-document candidate for it is emitted with
/// confidence `1 - max score` (1 when the response was empty).
pub fn process_external_response(
    lf_id: &str,
    doc: &Document,
    schema: &VariableSchema,
    response: &ScoreResponse,
    k: usize,
    min_confidence: f64,
) -> Result<Vec<Candidate>, LabelingError> {
    for (i, c) in response.candidates.iter().enumerate() {
        if !(c.score.is_finite() && (0.0..=1.0).contains(&c.score)) {
            return Err(LabelingError::Protocol(format!("candidate {i}: score {} outside [0, 1]", c.score)));
        }
        if c.start >= c.end || c.end > doc.char_count {
            return Err(LabelingError::Protocol(format!(
                "candidate {i}: span [{}, {}) invalid for a {}-char document",
                c.start, c.end, doc.char_count
            )));
        }
        if !schema.has_value(&c.value) {
            return Err(LabelingError::Protocol(format!(
                "candidate {i}: {} is not a value of {}",
                c.value, schema.variable_id
            )));
        }
    }

    let mut per_value: BTreeMap<&str, Vec<&ScoredSpan>> = BTreeMap::new();
    for c in response.candidates.iter().filter(|c| c.score >= min_confidence) {
        per_value.entry(c.value.as_str()).or_default().push(c);
    }

    let make = |value: &str, score: f64, span: Span| Candidate {
        lf_id: lf_id.to_string(),
        lf_kind: LfKind::External,
        variable_id: schema.variable_id.clone(),
        value: value.to_string(),
        confidence: score,
        raw_score: score,
        span,
    };

    let mut out = Vec::new();
    for value in &schema.label_values {
        let Some(mut spans) = per_value.remove(value.as_str()) else { continue };
        spans.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.start.cmp(&b.start)).then(a.end.cmp(&b.end)));
        spans.truncate(k);
        out.extend(
            spans
                .into_iter()
                .map(|s| make(value, s.score, Span::new(doc.doc_id.clone(), s.start, s.end))),
        );
    }

    if out.is_empty() && doc.char_count > 0 {
        if let Some(negative) = &schema.negative_value {
            let max_score = response.candidates.iter().map(|c| c.score).fold(None, |m: Option<f64>, s| {
                Some(m.map_or(s, |m| m.max(s)))
            });
            let confidence = max_score.map_or(1.0, |m| 1.0 - m);
            out.push(make(negative, confidence, doc.full_span()));
        }
    }
    Ok(out)
}
