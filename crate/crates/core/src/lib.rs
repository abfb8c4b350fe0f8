//! Value, right and duty generation over a pluggable model backend.
//!
//! [`pipeline`] overgenerates candidates, scores relevance, deduplicates and
//! attaches valence. [`decision`] folds candidates into a judgment
//! distribution with entropy. [`dataset`], [`tuner`], [`ethics`] and
//! [`evalkit`] cover corpus tooling, threshold search and evaluation.

pub mod backend;
pub mod codec;
pub mod dataset;
pub mod decision;
pub mod error;
pub mod ethics;
pub mod evalkit;
pub mod par;
pub mod pipeline;
pub mod textsim;
pub mod tuner;
pub mod types;

pub use backend::{Backend, BackendDescriptor, BackendMode, FixtureBackend, FixtureData, GenerationCandidate, RemoteBackend};
pub use decision::{decide, entropy, WeightOverrides};
pub use error::{BackendError, Error, Result};
pub use par::Execution;
pub use pipeline::{generate_values, Pipeline, PipelineOutput};
pub use types::{
    validate_params, DecisionResult, KindThresholds, ScoredCandidate, SystemParams, ValenceDistribution, ValenceLabel,
    ValueEntry, ValueKind,
};
