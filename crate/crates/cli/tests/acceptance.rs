// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance suite. Each test prints one `[PASS]` or `[FAIL]` line straight to
//! stderr (bypassing output capture) and then asserts the criterion.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use gig_core::experiment::{auc_per_seed, default_noise_grid, purity_sweep, summarize_residuals};
use gig_core::geodesic_energy::{elbo_estimate, optimize_path, straight_points, VariationalPathState};
use gig_core::graph::EuclideanMetric;
use gig_core::metrics::{mean_and_stderr, median, symmetry_check};
use gig_core::{
    geodesic_ig_knn, integrated_gradients, Algorithm, Dense, Edge, EnergyPathConfig, ExperimentConfig,
    GeodesicGraph, GigError, KnnConfig, MethodConfig, MlpModel, PreparedCell, ScalarTarget,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {id:>2} {name}: {detail}");
}

/// Seed 0 at noise 0.15 with the full configuration.
fn full_cell() -> &'static PreparedCell {
    static CELL: OnceLock<PreparedCell> = OnceLock::new();
    CELL.get_or_init(|| ExperimentConfig::default().prepare(0.15, 0).unwrap())
}

struct Sweep {
    elapsed: Duration,
    /// `(method, seed, auc)`.
    aucs: Vec<(String, u64, f64)>,
    /// Per seed at noise 0.15: (comp geodesic, comp random, log-odds geodesic, log-odds random).
    masking: Vec<(f64, f64, f64, f64)>,
    /// Seed 0 at noise 0.15: median strong residual of ig, geodesic_knn, enhanced_ig.
    strong: Option<(f64, f64, f64)>,
}

/// The 10,000-point, 7-noise, 5-seed purity study.
fn sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let grid = default_noise_grid();
        let seeds: Vec<u64> = (0..5).collect();
        let methods = [
            MethodConfig::Ig { steps: 64 },
            MethodConfig::GeodesicKnn(KnnConfig { k: 15, edge_steps: 10, attribution_steps: 16 }),
            MethodConfig::Random,
        ];
        let start = Instant::now();
        let mut masking = Vec::new();
        let mut strong = None;
        let rows = purity_sweep(&ExperimentConfig::default(), &grid, &seeds, &methods, |cell, results| {
            let _ = writeln!(std::io::stderr(), "  sweep cell noise {} seed {} done", cell.noise, cell.seed);
            if cell.noise != 0.15 {
                return;
            }
            // 50% of two features is the single top-ranked feature.
            let top = |i: usize| cell.mask_curves(&results[i].1, &[50.0]).unwrap()[0];
            let (geo, random) = (top(1), top(2));
            masking.push((geo.1, random.1, geo.2, random.2));
            if cell.seed == 0 {
                let strong_median = |tag: &str| {
                    let attrs = cell.attribute(&MethodConfig::from_tag(tag).unwrap()).unwrap();
                    summarize_residuals(&attrs).strong_median
                };
                strong = Some((strong_median("ig"), strong_median("geodesic_knn"), strong_median("enhanced_ig")));
            }
        })
        .unwrap();
        Sweep { elapsed: start.elapsed(), aucs: auc_per_seed(&rows, &grid).unwrap(), masking, strong }
    })
}

#[test]
fn criterion_01_gradient_oracle() {
    let model = &full_cell().model;
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let (mut worst, mut checked) = (0.0f64, 0);
    while checked < 100 {
        let x = vec![rng.gen_range(-1.5..2.5), rng.gen_range(-1.0..1.5)];
        // Central differences across a ReLU kink measure a secant.
        if model.kink_distance(&x).unwrap() < 10.0 * h {
            continue;
        }
        for target in [ScalarTarget::logit(1), ScalarTarget::probability(1 - model.predict(&x).unwrap())] {
            let g = model.input_gradient(&x, &target).unwrap();
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..2 {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[i] += h;
                down[i] -= h;
                let fd = (model.scalar_output(&up, &target).unwrap() - model.scalar_output(&down, &target).unwrap())
                    / (2.0 * h);
                worst = worst.max((g[i] - fd).abs() / scale);
            }
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-6 && elapsed < Duration::from_secs(5);
    report(1, "gradient oracle", pass, &format!("max rel err {worst:.2e} (< 1e-6), {:.2} s (< 5 s)", elapsed.as_secs_f64()));
    assert!(pass);
}

#[test]
fn criterion_02_completeness() {
    let cell = full_cell();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let idx: Vec<usize> = (0..200).map(|_| rng.gen_range(0..cell.test.len())).collect();
    let residuals = |m: usize| -> Vec<f64> {
        idx.iter()
            .map(|&i| {
                integrated_gradients(&cell.model, &cell.targets[i], &cell.test.points[i], &cell.baseline, m)
                    .unwrap()
                    .completeness_residual
            })
            .collect()
    };
    let medians: Vec<f64> = [32, 64, 128, 256, 512].iter().map(|&m| median(&residuals(m))).collect();
    let monotone = medians.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    let at_512 = residuals(512);
    let fraction = at_512.iter().filter(|&&r| r < 1e-3).count() as f64 / at_512.len() as f64;
    let pass = monotone && fraction >= 0.95;
    let medians: Vec<String> = medians.iter().map(|m| format!("{m:.2e}")).collect();
    report(
        2,
        "completeness",
        pass,
        &format!("{:.1}% below 1e-3 at m=512 (>= 95%); medians m=32..512 [{}]", 100.0 * fraction, medians.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_03_strong_completeness_ordering() {
    let (ig, knn, enhanced) = sweep().strong.expect("seed 0 cell at noise 0.15");
    let pass = knn <= 0.5 * ig && enhanced > knn;
    report(
        3,
        "strong completeness ordering",
        pass,
        &format!("median strong residual ig {ig:.3e}, geodesic_knn {knn:.3e} (<= 0.5x ig), enhanced_ig {enhanced:.3e} (> knn)"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_purity_reproduction() {
    let s = sweep();
    let per_method = |tag: &str| -> Vec<f64> { s.aucs.iter().filter(|r| r.0 == tag).map(|r| r.2).collect() };
    let (knn, ig, random) = (per_method("geodesic_knn"), per_method("ig"), per_method("random"));
    let wins = knn.iter().zip(&ig).filter(|(k, i)| k > i).count();
    let (mk, mi, mr) = (mean_and_stderr(&knn).0, mean_and_stderr(&ig).0, mean_and_stderr(&random).0);
    let in_band = (mk - 0.531).abs() <= 0.05 && (mi - 0.487).abs() <= 0.05;
    let fast = s.elapsed < Duration::from_secs(30 * 60);
    let pass = wins >= 3 && in_band && fast;
    report(
        4,
        "purity reproduction",
        pass,
        &format!(
            "geodesic_knn beats ig in {wins}/5 seeds (>= 3); mean AUC geodesic_knn {mk:.3} (0.531 +- 0.05), ig {mi:.3} (0.487 +- 0.05), random {mr:.3}; sweep {:.0} s (< 1800 s)",
            s.elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

fn random_graph(rng: &mut ChaCha8Rng) -> GeodesicGraph {
    let n = rng.gen_range(2..=10);
    let nodes: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
    let p = rng.gen_range(0.2..0.8);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push(Edge { i, j, weight: rng.gen_range(0.0..3.0), is_bridge: false });
            }
        }
    }
    GeodesicGraph::from_edges(nodes, edges, 0).unwrap()
}

fn exhaustive(g: &GeodesicGraph, u: usize, t: usize, seen: &mut Vec<bool>, path: &mut Vec<usize>, best: &mut Option<f64>) {
    if u == t {
        let w = g.path_weight(path);
        *best = Some(best.map_or(w, |b: f64| b.min(w)));
        return;
    }
    let next: Vec<usize> = g.neighbours(u).map(|(v, _)| v).collect();
    for v in next {
        if !seen[v] {
            seen[v] = true;
            path.push(v);
            exhaustive(g, v, t, seen, path, best);
            path.pop();
            seen[v] = false;
        }
    }
}

#[test]
fn criterion_05_shortest_path_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let g = random_graph(&mut rng);
        let (s, t) = (rng.gen_range(0..g.len()), rng.gen_range(0..g.len()));
        let mut seen = vec![false; g.len()];
        seen[s] = true;
        let mut best = None;
        exhaustive(&g, s, t, &mut seen, &mut vec![s], &mut best);
        for algo in [Algorithm::Dijkstra, Algorithm::AStar] {
            let ok = match (g.shortest_path(s, t, algo), best) {
                (Ok(r), Some(b)) => r.total_weight == b,
                (Err(GigError::Disconnected { .. }), None) => true,
                _ => false,
            };
            mismatches += usize::from(!ok);
        }
    }
    let pass = mismatches == 0;
    report(5, "shortest-path oracle", pass, &format!("{mismatches} mismatches over 1000 graphs x 2 algorithms"));
    assert!(pass);
}

#[test]
fn criterion_06_bridge_repair() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut disconnected, mut bad) = (0, 0);
    for trial in 0..100 {
        let pts: Vec<Vec<f64>> = if trial % 2 == 0 {
            let clusters = rng.gen_range(2..6);
            (0..clusters)
                .flat_map(|c| {
                    let centre = [c as f64 * 3.0, rng.gen_range(-2.0..2.0)];
                    (0..rng.gen_range(3..12))
                        .map(|_| vec![centre[0] + rng.gen_range(-0.3..0.3), centre[1] + rng.gen_range(-0.3..0.3)])
                        .collect::<Vec<_>>()
                })
                .collect()
        } else {
            gig_core::make_moons(60, 0.05, trial).unwrap().points
        };
        let mut g = GeodesicGraph::build(pts, 2, &EuclideanMetric).unwrap();
        let before = g.num_components();
        if before == 1 {
            continue;
        }
        disconnected += 1;
        let added = g.connect_components(&EuclideanMetric).unwrap();
        if g.num_components() != 1 || added != before - 1 || g.bridges().count() != before - 1 {
            bad += 1;
        }
    }
    let pass = bad == 0 && disconnected > 0;
    report(6, "bridge repair", pass, &format!("{disconnected} disconnected graphs, {bad} failures"));
    assert!(pass);
}

#[test]
fn criterion_07_energy_optimizer() {
    let config = EnergyPathConfig::default();
    let (baseline, input) = ([-0.5, -0.5], [1.0, 0.8]);

    let flat = MlpModel::zeros(&[2, 8, 2]).unwrap();
    let t = ScalarTarget::probability(1);
    let out = optimize_path(&flat, &t, &input, &baseline, &config, false).unwrap();
    let straight = straight_points(&baseline, &input, config.n_points);
    let flat_dev = out
        .points
        .iter()
        .zip(&straight)
        .flat_map(|(p, q)| p.iter().zip(q).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);

    let cell = full_cell();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut not_worse = 0;
    for _ in 0..50 {
        let a = &cell.test.points[rng.gen_range(0..cell.test.len())];
        let b = &cell.test.points[rng.gen_range(0..cell.test.len())];
        let out = optimize_path(&cell.model, &t, b, a, &config, false).unwrap();
        not_worse += usize::from(out.energy_optimized <= out.energy_straight);
    }

    let mut state = VariationalPathState::new(straight_points(&baseline, &input, config.n_points), 0.05);
    for row in state.mu.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.gen_range(-0.05..0.05);
        }
    }
    let noise = state.draw_noise(config.mc_samples, &mut rng);
    let est = elbo_estimate(&state, &cell.model, &t, &config, &noise).unwrap();
    let scale = est.grad_mu.iter().chain(&est.grad_log_sigma).flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..state.mu.len() {
        for j in 0..2 {
            for which in 0..2 {
                let (mut up, mut down) = (state.clone(), state.clone());
                let (pu, pd) = if which == 0 {
                    (&mut up.mu[i][j], &mut down.mu[i][j])
                } else {
                    (&mut up.log_sigma[i][j], &mut down.log_sigma[i][j])
                };
                *pu += h;
                *pd -= h;
                let fd = (elbo_estimate(&up, &cell.model, &t, &config, &noise).unwrap().elbo
                    - elbo_estimate(&down, &cell.model, &t, &config, &noise).unwrap().elbo)
                    / (2.0 * h);
                let analytic = if which == 0 { est.grad_mu[i][j] } else { est.grad_log_sigma[i][j] };
                worst = worst.max((fd - analytic).abs() / scale);
            }
        }
    }

    let pass = flat_dev < 1e-2 && not_worse as f64 >= 0.95 * 50.0 && worst < 1e-4;
    report(
        7,
        "energy optimizer",
        pass,
        &format!(
            "flat-model deviation {flat_dev:.2e} (< 1e-2); E(opt) <= E(straight) on {not_worse}/50 (>= 48); ELBO gradient rel err {worst:.2e} (< 1e-4)"
        ),
    );
    assert!(pass);
}

/// `f(x_0, x_1) = f(x_1, x_0)`: hidden units in pairs with swapped input weights
/// and equal outgoing weights.
fn symmetric_model(seed: u64) -> MlpModel {
    let base = MlpModel::init(&[2, 8, 2], seed).unwrap();
    let (first, second) = (&base.layers()[0], &base.layers()[1]);
    let half = first.out_dim();
    let (mut w1, mut b1) = (Vec::new(), Vec::new());
    for swap in [false, true] {
        for u in 0..half {
            let (a, b) = (first.weights()[2 * u], first.weights()[2 * u + 1]);
            w1.extend_from_slice(&if swap { [b, a] } else { [a, b] });
            b1.push(first.bias()[u]);
        }
    }
    let mut w2 = Vec::new();
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

#[test]
fn criterion_08_symmetry() {
    let probes: Vec<Vec<f64>> = (0..12).map(|i| vec![-0.3 + 0.15 * i as f64; 2]).collect();
    let mut cloud: Vec<Vec<f64>> = (0..60).map(|i| vec![-0.5 + 0.035 * i as f64; 2]).collect();
    for i in 0..40 {
        let a = -0.5 + 0.05 * i as f64;
        let b = a + 0.35 + 0.1 * ((i * 7) % 5) as f64;
        cloud.push(vec![a, b]);
        cloud.push(vec![b, a]);
    }
    let t = ScalarTarget::probability(1);
    let knn = KnnConfig { k: 4, ..KnnConfig::default() };
    let (mut ig_worst, mut geo_worst) = (0.0f64, 0.0f64);
    for seed in 0..5 {
        let model = symmetric_model(seed);
        ig_worst = ig_worst.max(
            symmetry_check(&model, &t, &probes, &[-0.5, -0.5], |x, b| integrated_gradients(&model, &t, x, b, 512))
                .unwrap(),
        );
        geo_worst = geo_worst.max(
            symmetry_check(&model, &t, &probes, &[-0.5, -0.5], |x, b| {
                geodesic_ig_knn(&model, &t, x, b, &cloud, &knn).map(|r| r.0)
            })
            .unwrap(),
        );
    }
    let pass = ig_worst <= 1e-8 && geo_worst <= 1e-6;
    report(
        8,
        "symmetry",
        pass,
        &format!("max |A1 - A2|: ig {ig_worst:.2e} (<= 1e-8), geodesic_knn {geo_worst:.2e} (<= 1e-6)"),
    );
    assert!(pass);
}

/// One-sided paired t-test p-value for `mean(d) > 0`.
fn one_sided_p(d: &[f64]) -> f64 {
    let (mean, se) = mean_and_stderr(d);
    if se == 0.0 {
        return if mean > 0.0 { 0.0 } else { 1.0 };
    }
    let t = StudentsT::new(0.0, 1.0, (d.len() - 1) as f64).unwrap();
    1.0 - t.cdf(mean / se)
}

#[test]
fn criterion_09_masking_substitute() {
    let m = &sweep().masking;
    let comp: Vec<f64> = m.iter().map(|r| r.0 - r.1).collect();
    let lo: Vec<f64> = m.iter().map(|r| r.3 - r.2).collect();
    let (p_comp, p_lo) = (one_sided_p(&comp), one_sided_p(&lo));
    let pass = m.len() == 5 && p_comp < 0.05 && p_lo < 0.05;
    let mean = |f: fn(&(f64, f64, f64, f64)) -> f64| m.iter().map(f).sum::<f64>() / m.len() as f64;
    report(
        9,
        "masking substitute",
        pass,
        &format!(
            "top-feature comprehensiveness geodesic {:.4} vs random {:.4} (p = {p_comp:.1e}); log-odds geodesic {:.4} vs random {:.4} (p = {p_lo:.1e}); paired one-sided t over {} seeds, p < 0.05",
            mean(|r| r.0),
            mean(|r| r.1),
            mean(|r| r.2),
            mean(|r| r.3),
            m.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_determinism() {
    let config = serde_json::json!({
        "experiment": { "n_points": 500, "train": { "epochs": 20 } },
        "noise_grid": [0.1, 0.3],
        "seeds": [0, 1],
        "methods": [
            { "method": "ig", "steps": 32 },
            { "method": "geodesic_knn", "k": 5, "edge_steps": 4, "attribution_steps": 8 },
            { "method": "gradient_shap", "n_samples": 16, "noise_sigma": 0.1 },
            { "method": "random" }
        ]
    });
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &runs {
        let path = dir.path().join("config.json");
        std::fs::write(&path, config.to_string()).unwrap();
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_gig"))
            .args(["benchmark", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    }
    let mut compared = 0;
    let mut differing = Vec::new();
    for name in ["purity.csv", "summary.csv", "mask_curves.csv", "purity_vs_noise.svg", "heatmap_geodesic_knn.svg"] {
        let a = std::fs::read(runs[0].path().join(name)).unwrap();
        let b = std::fs::read(runs[1].path().join(name)).unwrap();
        compared += 1;
        if a != b {
            differing.push(name);
        }
    }
    let pass = differing.is_empty();
    report(10, "determinism", pass, &format!("{compared} output files compared, differing: {differing:?}"));
    assert!(pass);
}
