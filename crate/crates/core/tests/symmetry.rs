// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use gig_core::metrics::symmetry_check;
use gig_core::{geodesic_ig_knn, integrated_gradients, Dense, GigError, KnnConfig, MlpModel, ScalarTarget};

fn probes() -> Vec<Vec<f64>> {
    (0..12).map(|i| vec![-0.3 + 0.15 * i as f64; 2]).collect()
}

/// Diagonal points plus mirrored off-diagonal pairs.
fn mirrored_cloud() -> Vec<Vec<f64>> {
    let mut cloud: Vec<Vec<f64>> = (0..60).map(|i| vec![-0.5 + 0.035 * i as f64; 2]).collect();
    for i in 0..40 {
        let a = -0.5 + 0.05 * i as f64;
        let b = a + 0.35 + 0.1 * ((i * 7) % 5) as f64;
        cloud.push(vec![a, b]);
        cloud.push(vec![b, a]);
    }
    cloud
}

#[test]
fn fixture_is_symmetric() {
    let model = common::symmetric_model(3);
    for p in [[0.1, 0.7], [-0.4, 1.3], [2.0, -1.0]] {
        for t in [ScalarTarget::probability(1), ScalarTarget::logit(0)] {
            let a = model.scalar_output(&p, &t).unwrap();
            let b = model.scalar_output(&[p[1], p[0]], &t).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn straight_ig_preserves_symmetry() {
    for seed in 0..5 {
        let model = common::symmetric_model(seed);
        let t = ScalarTarget::probability(1);
        let worst = symmetry_check(&model, &t, &probes(), &[-0.5, -0.5], |x, b| {
            integrated_gradients(&model, &t, x, b, 512)
        })
        .unwrap();
        assert!(worst <= 1e-8, "seed {seed}: {worst:e}");
    }
}

#[test]
fn geodesic_ig_preserves_symmetry_with_mirrored_cloud() {
    let cloud = mirrored_cloud();
    for seed in 0..5 {
        let model = common::symmetric_model(seed);
        let t = ScalarTarget::probability(1);
        let cfg = KnnConfig { k: 4, ..KnnConfig::default() };
        let worst = symmetry_check(&model, &t, &probes(), &[-0.5, -0.5], |x, b| {
            geodesic_ig_knn(&model, &t, x, b, &cloud, &cfg).map(|r| r.0)
        })
        .unwrap();
        assert!(worst <= 1e-6, "seed {seed}: {worst:e}");
    }
}

#[test]
fn asymmetric_fixture_is_rejected() {
    let model = MlpModel::new(vec![Dense::new(2, 2, vec![0.0, 0.0, 1.0, 2.0], vec![0.0; 2]).unwrap()]).unwrap();
    let t = ScalarTarget::logit(1);
    let r = symmetry_check(&model, &t, &probes(), &[0.0, 0.0], |x, b| integrated_gradients(&model, &t, x, b, 8));
    assert!(matches!(r, Err(GigError::Fixture(_))));
}
