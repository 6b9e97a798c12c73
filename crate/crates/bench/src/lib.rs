// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared fixtures for the benchmarks in `benches/`.

use gig_core::{ExperimentConfig, MlpModel, TrainConfig};

/// A moons model and its test points, trained briefly on `n_points` samples.
pub fn fixture(n_points: usize) -> (MlpModel, Vec<Vec<f64>>) {
    let config = ExperimentConfig {
        n_points,
        train: TrainConfig { epochs: 10, ..TrainConfig::default() },
        ..ExperimentConfig::default()
    };
    let cell = config.prepare(0.15, 0).expect("fixture training");
    (cell.model, cell.test.points)
}
