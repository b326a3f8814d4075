//! Core algorithms for human-validated information extraction.
//!
//! An ensemble of labeling functions nominates `(value, confidence, span)`
//! candidates for every variable of a document. Candidates that agree on a
//! value and cite overlapping text are merged into explanation groups, which a
//! weak-supervision label model scores and ranks. A validation session serves
//! the ranked groups to annotators, defers confident items to automation, and
//! exports a reproducible table with full provenance.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, transport and
//! the command-line driver live in the `elicit` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod evaluation;
pub mod labeling;
pub mod labelmodel;
pub mod pipeline;
pub mod schema;
pub mod session;
pub mod text;

pub use corpus::{ChatMessage, Corpus, Document, Sender, SourceKind, Span};
pub use labeling::{Candidate, ExplanationGroup};
pub use labelmodel::{LabelModelFit, LambdaMatrix, OmegaMask, SolverParams};
pub use schema::{DeferralPolicy, LfConfig, LfKind, LfSpec, ProjectConfig, VariableSchema};
pub use session::{ItemKey, SessionState, ValidationRecord};
