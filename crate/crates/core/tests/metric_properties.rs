// SPDX-License-Identifier: MIT OR Apache-2.0

use gig_core::diffnet::log_softmax;
use gig_core::metrics::{
    area_under_curve, comprehensiveness, log_odds, mask_curve, purity_auc, purity_from_scores,
};
use gig_core::{MlpModel, ScalarTarget};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn log_softmax_normalizes(logits in prop::collection::vec(-700.0f64..700.0, 2..8)) {
        let total: f64 = log_softmax(&logits).iter().map(|v| v.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn purity_is_a_fraction(
        scores in prop::collection::vec(-5.0f64..5.0, 2..60),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = scores.iter().map(|_| usize::from(rand::Rng::gen_bool(&mut rng, 0.5))).collect();
        let p = purity_from_scores(&scores, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        // Any constant ranking resolves ties identically.
        let zero = purity_from_scores(&vec![0.0; scores.len()], &labels).unwrap();
        let seven = purity_from_scores(&vec![7.0; scores.len()], &labels).unwrap();
        prop_assert_eq!(zero, seven);
    }

    #[test]
    fn curve_summaries_are_linear(
        values in prop::collection::vec(-2.0f64..2.0, 65),
        c in -10.0f64..10.0,
    ) {
        let grid: Vec<f64> = (1..=65).map(f64::from).collect();
        let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
        let a = area_under_curve(&grid, &values).unwrap();
        let b = area_under_curve(&grid, &scaled).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-12 * (1.0 + a.abs() * c.abs()));
        let over = mask_curve(grid.clone(), scaled.clone(), true).unwrap();
        prop_assert!((over.summary + b).abs() <= 1e-15 * (1.0 + b.abs()));
        let noise: Vec<f64> = (0..7).map(|i| 0.05 + 0.1 * f64::from(i)).collect();
        let p: Vec<f64> = values[..7].to_vec();
        let ps: Vec<f64> = scaled[..7].to_vec();
        let (pa, pb) = (purity_auc(&noise, &p).unwrap(), purity_auc(&noise, &ps).unwrap());
        prop_assert!((pb - c * pa).abs() <= 1e-12 * (1.0 + pa.abs() * c.abs()));
    }

    #[test]
    fn masking_everything_measures_the_fill_gap(x0 in -2.0f64..2.0, x1 in -2.0f64..2.0, a0 in -1.0f64..1.0, a1 in -1.0f64..1.0) {
        let model = MlpModel::init(&[2, 6, 2], 13).unwrap();
        let t = ScalarTarget::probability(1);
        let fill = [-0.5, -0.5];
        let x = [x0, x1];
        let c = comprehensiveness(&model, &t, &x, &[a0, a1], 100.0, &fill).unwrap();
        let expected = model.scalar_output(&x, &t).unwrap() - model.scalar_output(&fill, &t).unwrap();
        prop_assert_eq!(c, expected);
        prop_assert_eq!(log_odds(&model, &t, &x, &[a0, a1], 0.0, &fill).unwrap(), 0.0);
    }
}

#[test]
fn constant_scores_on_shuffled_labels_average_one_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut labels: Vec<usize> = (0..200).map(|i| i % 2).collect();
    let mut total = 0.0;
    let runs = 2000;
    for _ in 0..runs {
        labels.shuffle(&mut rng);
        total += purity_from_scores(&[1.0; 200], &labels).unwrap();
    }
    let mean = total / runs as f64;
    // Standard error of the mean is about 0.035 / sqrt(2000) < 1e-3.
    assert!((mean - 0.5).abs() < 5e-3, "{mean}");
}

#[test]
fn oracle_scores_maximize_purity() {
    let model = MlpModel::init(&[2, 6, 2], 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let points: Vec<[f64; 2]> = (0..300)
        .map(|_| [rand::Rng::gen_range(&mut rng, -2.0..2.0), rand::Rng::gen_range(&mut rng, -2.0..2.0)])
        .collect();
    let predicted: Vec<usize> = points.iter().map(|p| model.predict(p).unwrap()).collect();
    let oracle: Vec<f64> = points
        .iter()
        .map(|p| model.scalar_output(p, &ScalarTarget::probability(1)).unwrap())
        .collect();
    let best = purity_from_scores(&oracle, &predicted).unwrap();
    for seed in 0..50 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let other: Vec<f64> = points.iter().map(|_| rand::Rng::gen::<f64>(&mut r)).collect();
        assert!(purity_from_scores(&other, &predicted).unwrap() <= best);
    }
}
