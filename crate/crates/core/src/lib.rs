//! Influence and susceptibility reconstruction from multi-cascade spreading data.
//!
//! The pipeline runs in five stages, one module each:
//!
//! - [`ingest`] parses reshare event logs into a [`CascadeStore`] and splits it
//!   by time.
//! - [`graph`] turns a store into a weighted [`DiffusionGraph`] whose edge
//!   weights are empirical contagion rates.
//! - [`solver`] runs the nonlinear influence/susceptibility fixed-point map on
//!   that graph.
//! - [`sim`] generates ground truth and synthetic corpora under the
//!   influence-times-susceptibility diffusion model.
//! - [`predict`], [`superspread`] and [`stats`] evaluate the reconstructed
//!   scores against baselines and null models.

pub mod error;
pub mod graph;
pub mod ingest;
pub mod predict;
pub mod sim;
pub mod solver;
pub mod stats;
pub mod superspread;

pub use error::{Error, Result};
pub use graph::{Digraph, DiffusionGraph, Direction, RateDenominator};
pub use ingest::{CascadeStore, Delimiter, EventRecord, ParseReport};
pub use predict::{EdgeScoreMap, SimilarityKind, SingleProperty};
pub use sim::{GroundTruth, SimConfig};
pub use solver::{ScoreVector, SolverConfig};
pub use stats::{CorrMethod, EvalReport};
pub use superspread::{SeedMetric, SeedRanking};

/// Dense 0-based node index.
pub type NodeIdx = u32;
