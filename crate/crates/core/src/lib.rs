//! Direction-aware graph learning.
//!
//! The crate trains small graph convolutional networks on directed graphs and
//! explains their node predictions with edge-mask explainers, under two
//! interchangeable propagation operators: the usual symmetrized GCN
//! normalization, which discards edge orientation, and a Hermitian-averaged
//! PageRank operator that keeps it. Everything downstream of the operator
//! (training, explanation, evaluation) is operator-agnostic, which is what
//! makes the two pipelines comparable edge for edge.
//!
//! Module map:
//! - [`graph`]: directed graphs, neighborhoods, CSV serialization.
//! - [`rng`]: labeled deterministic random streams.
//! - [`preprocess`]: the two propagation operators in sparse-plus-low-rank
//!   form, stationary distributions, spectral entropy.
//! - [`nn`]: the GCN, its trainer, and checkpoint files.
//! - [`explain`]: per-node and amortized edge-mask explainers, top-k subgraph
//!   extraction, and a brute-force reference search.
//! - [`eval`]: ranking metrics, fidelity, characterization scores, and the
//!   inequality test harness for directional information loss.
//! - [`datagen`]: synthetic benchmark graphs with planted motifs.
//! - [`realworld`]: loaders for external edge-list datasets.
//! - [`config`]: run configuration files and their content hash.

#![forbid(unsafe_code)]

pub mod config;
pub mod datagen;
pub mod eval;
pub mod explain;
pub mod graph;
pub mod nn;
pub mod preprocess;
pub mod realworld;
pub mod rng;

pub use config::RunConfig;
pub use datagen::{Dataset, DatasetKind, SyntheticSpec};
pub use eval::{FidelityConvention, MetricsReport, NodeMetrics};
pub use explain::{Explanation, ExplainerConfig, ExplainerKind, PgExplainer};
pub use graph::{DiGraph, Direction, EdgeSet, NodeSet, Split};
pub use nn::{GcnModel, ModelConfig, TrainConfig};
pub use preprocess::{Pipeline, Prepared, PropagationMatrix};
