use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{Candidate, LabelingError};
use crate::corpus::{Document, Span};
use crate::schema::{LfKind, VariableSchema};
use crate::text::{fnv1a64, sentence_spans, tokens};

/// Maps text to a fixed-length vector.
pub trait Embedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, LabelingError>;
}

pub const DEFAULT_EMBED_DIM: usize = 512;

/// Deterministic hashed bag-of-tokens embedder: each lowercased token adds 1
/// to bucket `fnv1a64(token) % dim`. No learned weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedEmbedder {
    pub dim: usize,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_EMBED_DIM }
    }
}

impl Embedder for HashedEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, LabelingError> {
        if self.dim == 0 {
            return Err(LabelingError::EmbedderFailure("zero embedding dimension".into()));
        }
        let mut v = vec![0.0; self.dim];
        for (_, _, tok) in tokens(text) {
            let bucket = (fnv1a64([tok.as_bytes()]) % self.dim as u64) as usize;
            v[bucket] += 1.0;
        }
        Ok(v)
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (libm::sqrt(na) * libm::sqrt(nb))
}

/// Text a label value is embedded as: its identifier (underscores read as
/// spaces) followed by the value's keywords.
pub fn label_text(schema: &VariableSchema, value: &str) -> String {
    let mut text = value.replace('_', " ");
    if let Some(keywords) = schema.keywords.get(value) {
        for kw in keywords {
            text.push(' ');
            text.push_str(kw);
        }
    }
    text
}

/// Sentence-level similarity labeling function.
///
/// For every label value, the `k` sentences most similar to the value's
/// label text with similarity at least `threshold` become candidates (ties go
/// to the earlier sentence).
pub fn run_similarity_lf(
    lf_id: &str,
    doc: &Document,
    schema: &VariableSchema,
    embedder: &dyn Embedder,
    threshold: f64,
    k: usize,
) -> Result<Vec<Candidate>, LabelingError> {
    let sentences: Vec<(usize, usize, Vec<f64>)> = sentence_spans(&doc.text)
        .into_iter()
        .map(|(s, e)| {
            let text = crate::text::char_slice(&doc.text, s, e);
            embedder.embed(text).map(|v| (s, e, v))
        })
        .collect::<Result<_, _>>()?;

    let mut out = Vec::new();
    for value in &schema.label_values {
        let label = embedder.embed(&label_text(schema, value))?;
        let mut scored: Vec<(f64, usize, usize)> = sentences
            .iter()
            .map(|(s, e, v)| (cosine(v, &label), *s, *e))
            .filter(|(sim, _, _)| *sim >= threshold)
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.truncate(k);
        out.extend(scored.into_iter().map(|(sim, s, e)| Candidate {
            lf_id: lf_id.to_string(),
            lf_kind: LfKind::Similarity,
            variable_id: schema.variable_id.clone(),
            value: value.clone(),
            confidence: sim.clamp(0.0, 1.0),
            raw_score: sim,
            span: Span::new(doc.doc_id.clone(), s, e),
        }));
    }
    Ok(out)
}
