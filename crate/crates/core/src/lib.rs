// SPDX-License-Identifier: MIT OR Apache-2.0

//! Path attributions for small differentiable classifiers.
//!
//! Straight-line integrated gradients integrate the input gradient along the
//! segment from a baseline to the input. The geodesic variants integrate along
//! a path that avoids regions of large gradient instead, found either as a
//! shortest path through a gradient-weighted kNN graph ([`geodesic_knn`]) or by
//! minimising a path energy with stochastic variational inference
//! ([`geodesic_energy`]).

pub mod baselines;
pub mod data;
pub mod diffnet;
pub mod error;
pub mod experiment;
pub mod geodesic_energy;
pub mod geodesic_knn;
pub mod graph;
pub mod metrics;
pub mod path;

pub use baselines::{derive_seed, MethodConfig};
pub use data::{make_moons, split, Dataset};
pub use diffnet::{train, Dense, MlpModel, OutputSpace, ScalarTarget, TrainConfig, TrainReport};
pub use error::{GigError, Result};
pub use experiment::{ExperimentConfig, GraphSamples, PreparedCell, PurityRow};
pub use geodesic_energy::{geodesic_ig_energy, EnergyPathConfig, OptimizedPath};
pub use geodesic_knn::{geodesic_ig_knn, KnnConfig, PathGraph};
pub use graph::{Algorithm, Edge, GeodesicGraph, ShortestPathResult};
pub use path::{integrated_gradients, path_attribution, Attribution, Path};
