// SPDX-License-Identifier: MIT OR Apache-2.0

#![allow(dead_code)]

use std::sync::OnceLock;

use gig_core::experiment::PreparedCell;
use gig_core::{Dense, ExperimentConfig, MlpModel};

/// A moons model trained on a reduced dataset (2,000 points, noise 0.15).
pub fn small_cell() -> &'static PreparedCell {
    static CELL: OnceLock<PreparedCell> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = ExperimentConfig {
            n_points: 2000,
            ..ExperimentConfig::default()
        };
        cfg.prepare(0.15, 7).expect("training the fixture model")
    })
}

/// A moons model trained with the full configuration at noise 0.15.
pub fn full_cell() -> &'static PreparedCell {
    static CELL: OnceLock<PreparedCell> = OnceLock::new();
    CELL.get_or_init(|| ExperimentConfig::default().prepare(0.15, 0).expect("training the fixture model"))
}

/// A 2-input network with `f(x_0, x_1) = f(x_1, x_0)` exactly.
///
/// Hidden units come in pairs whose input weights are swapped copies of each
/// other and whose outgoing weights are equal, so swapping the inputs only
/// permutes hidden units within each pair.
pub fn symmetric_model(seed: u64) -> MlpModel {
    let base = MlpModel::init(&[2, 8, 2], seed).unwrap();
    let first = &base.layers()[0];
    let second = &base.layers()[1];
    let half = first.out_dim();
    let mut w1 = Vec::with_capacity(4 * half);
    let mut b1 = Vec::with_capacity(2 * half);
    for u in 0..half {
        let (a, b) = (first.weights()[2 * u], first.weights()[2 * u + 1]);
        w1.extend_from_slice(&[a, b]);
        b1.push(first.bias()[u]);
    }
    for u in 0..half {
        let (a, b) = (first.weights()[2 * u], first.weights()[2 * u + 1]);
        w1.extend_from_slice(&[b, a]);
        b1.push(first.bias()[u]);
    }
    let mut w2 = Vec::with_capacity(2 * 2 * half);
    for c in 0..2 {
        let row = &second.weights()[c * half..(c + 1) * half];
        w2.extend_from_slice(row);
        w2.extend_from_slice(row);
    }
    MlpModel::new(vec![
        Dense::new(2, 2 * half, w1, b1).unwrap(),
        Dense::new(2 * half, 2, w2, second.bias().to_vec()).unwrap(),
    ])
    .unwrap()
}
