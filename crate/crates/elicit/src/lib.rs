//! File formats, labeling-function transport, the validation API and the
//! `elicit` command line, on top of `elicit-core`.

pub mod cli;
pub mod export;
pub mod ingest;
pub mod lfs;
pub mod project;
pub mod server;
pub mod store;
pub mod workflow;

pub use project::{load_project, save_project, ProjectError};
