//! Relation-aware scoring-function search for knowledge-graph embedding.
//!
//! Relations are clustered into groups, and each group gets its own
//! block-bilinear scoring function sampled by a recurrent controller.
//! Candidate functions share one embedding table while the search runs.

pub mod app;
pub mod controller;
pub mod error;
pub mod evaluator;
pub mod grouping;
pub mod kg_store;
pub mod scorer;
pub mod search_engine;
pub mod search_space;
pub mod trainer;

pub use error::{ErasError, Result};
