//! Series-parallel computation DAGs with per-node access scripts.

mod dag;
mod json;
mod types;
mod validate;

pub use dag::{compose_parallel, compose_series, DagBuilder, Frag, SPDag};
pub use json::{from_json, to_json};
pub use types::*;
pub use validate::{heights, validate, Finding, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum DagError {
    #[error("empty dag")]
    Empty,
    #[error("dag contains a cycle")]
    Cycle,
    #[error("malformed dag: {0}")]
    Structure(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
