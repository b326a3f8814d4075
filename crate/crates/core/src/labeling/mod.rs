//! Labeling functions, top-K selection and explanation merging.

mod external;
mod keyword;
mod merge;
mod similarity;
mod topk;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Span;
use crate::schema::LfKind;

pub use external::{
    process_external_response, ScoreRequest, ScoreResponse, ScoredSpan, PROTOCOL_VERSION,
};
pub use keyword::{run_keyword_lf, KEYWORD_CONFIDENCE};
pub use merge::merge_candidates;
pub use similarity::{cosine, run_similarity_lf, Embedder, HashedEmbedder, DEFAULT_EMBED_DIM};
pub use topk::select_top_k;

/// One nomination by one labeling function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub lf_id: String,
    pub lf_kind: LfKind,
    pub variable_id: String,
    pub value: String,
    /// Calibrated confidence in `[0, 1]`.
    pub confidence: f64,
    /// Score as produced by the labeling function.
    pub raw_score: f64,
    pub span: Span,
}

impl Candidate {
    /// Keyword hits carry a nominal score rather than a model confidence.
    pub fn is_uncalibrated(&self) -> bool {
        self.lf_kind == LfKind::Keyword
    }
}

/// Candidates of one variable and value whose spans overlap enough to be
/// shown to the annotator as a single explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationGroup {
    pub group_id: String,
    pub doc_id: String,
    pub variable_id: String,
    pub value: String,
    pub members: Vec<Candidate>,
    /// Hull of the member spans.
    pub merged_span: Span,
    /// Number of distinct labeling functions among the members.
    pub agreement: usize,
    /// Label-model confidence; set by [`crate::labelmodel`].
    pub group_confidence: f64,
}

impl ExplanationGroup {
    pub fn lf_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.members.iter().map(|c| c.lf_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn has_member_from(&self, lf_id: &str) -> bool {
        self.members.iter().any(|c| c.lf_id == lf_id)
    }

    /// Mean member confidence, used for ranking before any label model exists.
    pub fn mean_member_confidence(&self) -> f64 {
        if self.members.is_empty() {
            return 0.0;
        }
        self.members.iter().map(|c| c.confidence).sum::<f64>() / self.members.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LabelingError {
    #[error("embedder failure: {0}")]
    EmbedderFailure(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("transport error: {0}")]
    Transport(String),
}
