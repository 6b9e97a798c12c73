// SPDX-License-Identifier: MIT OR Apache-2.0

//! Energy-based geodesic approximation.
//!
//! A straight line from baseline to input is discretized into `n_points`
//! points `γ⁰`. The path energy is
//!
//! ```text
//! E(γ) = Σ_i ||γ_i − γ⁰_i|| − β Σ_i ||∇f(γ_i)|| + w Σ_{i ∈ ends} ||γ_i − γ⁰_i||
//! ```
//!
//! where `ends` are the first and last `ceil(fraction · n)` indices. A
//! factorized Gaussian `q(γ) = Π N(γ⁰_i + μ_i, diag σ_i²)` is fitted to
//! `p(γ) ∝ exp(−E(γ)/T)` by stochastic ELBO ascent with reparameterized
//! gradients (Adam on `μ` and `log σ`). The fitted mean is then polished by
//! deterministic proximal descent on `E`, whose group soft-threshold step sets
//! deviations in flat regions exactly to zero.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffnet::{l2_norm, MlpModel, ScalarTarget};
use crate::error::{check_dim, GigError, Result};
use crate::path::{distance, path_attribution, Attribution, Path};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyPathConfig {
    /// Points in the discretized path, endpoints included.
    pub n_points: usize,
    /// Weight of the gradient-norm term.
    pub beta: f64,
    /// Extra distance weight on the end segments.
    pub endpoint_weight: f64,
    /// Fraction of points at each end that count as endpoints.
    pub endpoint_fraction: f64,
    pub iters: usize,
    pub learning_rate: f64,
    /// Step size at iteration `t` is `learning_rate / (1 + lr_decay · t)`.
    pub lr_decay: f64,
    pub mc_samples: usize,
    pub seed: u64,
    /// Initial σ for every coordinate.
    pub init_scale: f64,
    /// Temperature `T` of the target density `exp(−E/T)`.
    pub temperature: f64,
    /// Proximal descent iterations applied to the fitted mean.
    pub refine_iters: usize,
    /// Pin the first and last point to the baseline and input exactly.
    pub clamp_endpoints: bool,
}

impl Default for EnergyPathConfig {
    fn default() -> Self {
        Self {
            n_points: 16,
            beta: 0.3,
            endpoint_weight: 10.0,
            endpoint_fraction: 0.10,
            iters: 300,
            learning_rate: 0.01,
            lr_decay: 0.01,
            mc_samples: 4,
            seed: 0,
            init_scale: 0.1,
            temperature: 0.01,
            refine_iters: 200,
            clamp_endpoints: false,
        }
    }
}

impl EnergyPathConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(GigError::Argument(msg.to_string()));
        if self.n_points < 3 {
            return bad("n_points must be >= 3");
        }
        if !(self.endpoint_fraction > 0.0 && self.endpoint_fraction < 0.5) {
            return bad("endpoint_fraction must lie in (0, 0.5)");
        }
        if !(self.beta >= 0.0 && self.endpoint_weight >= 0.0) {
            return bad("beta and endpoint_weight must be >= 0");
        }
        if !(self.temperature > 0.0 && self.init_scale > 0.0) {
            return bad("temperature and init_scale must be > 0");
        }
        if !(self.learning_rate >= 0.0 && self.lr_decay >= 0.0) {
            return bad("learning_rate and lr_decay must be >= 0");
        }
        if self.mc_samples == 0 {
            return bad("mc_samples must be >= 1");
        }
        Ok(())
    }

    fn endpoint_count(&self, n: usize) -> usize {
        endpoint_count(n, self.endpoint_fraction)
    }
}

fn endpoint_count(n: usize, fraction: f64) -> usize {
    (fraction * n as f64).ceil() as usize
}

fn is_endpoint(i: usize, n: usize, count: usize) -> bool {
    i < count || i + count >= n
}

/// `n` evenly spaced points from `baseline` to `input`, both included.
pub fn straight_points(baseline: &[f64], input: &[f64], n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            if i == n - 1 {
                input.to_vec()
            } else {
                baseline.iter().zip(input).map(|(a, b)| a + t * (b - a)).collect()
            }
        })
        .collect()
}

/// Path energy: distance to `gamma0`, minus `beta` times gradient norms, plus the endpoint term.
pub fn energy(
    model: &MlpModel,
    target: &ScalarTarget,
    path_points: &[Vec<f64>],
    gamma0: &[Vec<f64>],
    beta: f64,
    endpoint_weight: f64,
    endpoint_fraction: f64,
) -> Result<f64> {
    if path_points.len() != gamma0.len() {
        return Err(GigError::Argument(format!(
            "path has {} points but the reference has {}",
            path_points.len(),
            gamma0.len()
        )));
    }
    let n = path_points.len();
    let ends = endpoint_count(n, endpoint_fraction);
    let mut total = 0.0;
    for (i, (p, p0)) in path_points.iter().zip(gamma0).enumerate() {
        check_dim(p0.len(), p.len())?;
        let d = distance(p, p0);
        let weight = if is_endpoint(i, n, ends) { 1.0 + endpoint_weight } else { 1.0 };
        let c = if beta == 0.0 { 0.0 } else { l2_norm(&model.input_gradient(p, target)?) };
        total += weight * d - beta * c;
    }
    Ok(total)
}

/// Energy and its gradient with respect to every path point.
fn energy_and_gradient(
    model: &MlpModel,
    target: &ScalarTarget,
    points: &[Vec<f64>],
    gamma0: &[Vec<f64>],
    config: &EnergyPathConfig,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = points.len();
    let ends = config.endpoint_count(n);
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(n);
    for (i, (p, p0)) in points.iter().zip(gamma0).enumerate() {
        let weight = if is_endpoint(i, n, ends) { 1.0 + config.endpoint_weight } else { 1.0 };
        let diff: Vec<f64> = p.iter().zip(p0).map(|(a, b)| a - b).collect();
        let d = l2_norm(&diff);
        let mut g: Vec<f64> = if d > 0.0 { diff.iter().map(|v| weight * v / d).collect() } else { vec![0.0; p.len()] };
        total += weight * d;
        if config.beta != 0.0 {
            let (c, dc) = model.gradient_norm_and_gradient(p, target)?;
            total -= config.beta * c;
            for (gi, dci) in g.iter_mut().zip(&dc) {
                *gi -= config.beta * dci;
            }
        }
        grads.push(g);
    }
    Ok((total, grads))
}

/// Factorized Gaussian over per-point deviations from the straight line, with Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalPathState {
    pub gamma0: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub log_sigma: Vec<Vec<f64>>,
    adam: AdamState,
}

#[derive(Clone, Debug, PartialEq)]
struct AdamState {
    step: u64,
    m_mu: Vec<Vec<f64>>,
    v_mu: Vec<Vec<f64>>,
    m_ls: Vec<Vec<f64>>,
    v_ls: Vec<Vec<f64>>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl VariationalPathState {
    pub fn new(gamma0: Vec<Vec<f64>>, init_scale: f64) -> Self {
        let zeros: Vec<Vec<f64>> = gamma0.iter().map(|p| vec![0.0; p.len()]).collect();
        let log_sigma = gamma0.iter().map(|p| vec![init_scale.ln(); p.len()]).collect();
        Self {
            mu: zeros.clone(),
            log_sigma,
            adam: AdamState {
                step: 0,
                m_mu: zeros.clone(),
                v_mu: zeros.clone(),
                m_ls: zeros.clone(),
                v_ls: zeros,
            },
            gamma0,
        }
    }

    pub fn sigma(&self) -> Vec<Vec<f64>> {
        self.log_sigma.iter().map(|p| p.iter().map(|v| v.exp()).collect()).collect()
    }

    /// `γ⁰ + μ`.
    pub fn mean_path(&self) -> Vec<Vec<f64>> {
        self.gamma0
            .iter()
            .zip(&self.mu)
            .map(|(p, m)| p.iter().zip(m).map(|(a, b)| a + b).collect())
            .collect()
    }

    fn is_clamped(&self, i: usize, config: &EnergyPathConfig) -> bool {
        config.clamp_endpoints && (i == 0 || i + 1 == self.gamma0.len())
    }

    /// Standard-normal draws for one ELBO estimate: `[sample][point][coord]`.
    pub fn draw_noise(&self, samples: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<f64>>> {
        (0..samples)
            .map(|_| {
                self.gamma0
                    .iter()
                    .map(|p| p.iter().map(|_| StandardNormal.sample(rng)).collect())
                    .collect()
            })
            .collect()
    }
}

/// Monte-Carlo ELBO at fixed noise and its gradients.
#[derive(Clone, Debug)]
pub struct ElboEstimate {
    /// `mean_s[−E(γ_s)/T] + Σ log σ` (additive constants dropped).
    pub elbo: f64,
    pub grad_mu: Vec<Vec<f64>>,
    pub grad_log_sigma: Vec<Vec<f64>>,
}

/// ELBO with reparameterized samples `γ = γ⁰ + μ + σ ⊙ ε` for the given `noise`.
pub fn elbo_estimate(
    state: &VariationalPathState,
    model: &MlpModel,
    target: &ScalarTarget,
    config: &EnergyPathConfig,
    noise: &[Vec<Vec<f64>>],
) -> Result<ElboEstimate> {
    let n = state.gamma0.len();
    let sigma = state.sigma();
    let zeros = || -> Vec<Vec<f64>> { state.gamma0.iter().map(|p| vec![0.0; p.len()]).collect() };
    let mut grad_mu = zeros();
    let mut grad_ls = zeros();
    let mut mean_energy = 0.0;
    let scale = 1.0 / (noise.len() as f64 * config.temperature);
    for eps in noise {
        check_dim(n, eps.len())?;
        let points: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                if state.is_clamped(i, config) {
                    return state.gamma0[i].clone();
                }
                state.gamma0[i]
                    .iter()
                    .zip(&state.mu[i])
                    .zip(&sigma[i])
                    .zip(&eps[i])
                    .map(|(((g0, m), s), e)| g0 + m + s * e)
                    .collect()
            })
            .collect();
        let (e, de) = energy_and_gradient(model, target, &points, &state.gamma0, config)?;
        mean_energy += e / noise.len() as f64;
        for i in 0..n {
            if state.is_clamped(i, config) {
                continue;
            }
            for j in 0..de[i].len() {
                grad_mu[i][j] -= scale * de[i][j];
                grad_ls[i][j] -= scale * de[i][j] * sigma[i][j] * eps[i][j];
            }
        }
    }
    let mut entropy = 0.0;
    for i in 0..n {
        if state.is_clamped(i, config) {
            continue;
        }
        for (g, ls) in grad_ls[i].iter_mut().zip(&state.log_sigma[i]) {
            *g += 1.0;
            entropy += ls;
        }
    }
    Ok(ElboEstimate {
        elbo: -mean_energy / config.temperature + entropy,
        grad_mu,
        grad_log_sigma: grad_ls,
    })
}

/// One Adam ascent step on the Monte-Carlo ELBO. Returns the ELBO estimate
/// at the pre-update parameters.
pub fn elbo_step(
    state: &mut VariationalPathState,
    model: &MlpModel,
    target: &ScalarTarget,
    config: &EnergyPathConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let noise = state.draw_noise(config.mc_samples, rng);
    let est = elbo_estimate(state, model, target, config, &noise)?;
    let iteration = state.adam.step as usize;
    if !est.elbo.is_finite() {
        return Err(GigError::ElboDivergence { iteration });
    }
    let adam = &mut state.adam;
    adam.step += 1;
    let t = adam.step as i32;
    let base = config.learning_rate / (1.0 + config.lr_decay * (t - 1) as f64);
    let lr = base * (1.0 - ADAM_BETA2.powi(t)).sqrt() / (1.0 - ADAM_BETA1.powi(t));
    let update = |params: &mut Vec<Vec<f64>>, m: &mut Vec<Vec<f64>>, v: &mut Vec<Vec<f64>>, g: &Vec<Vec<f64>>| {
        for (((p, m), v), g) in params.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
            for (((p, m), v), g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *p += lr * *m / (v.sqrt() + ADAM_EPS);
            }
        }
    };
    update(&mut state.mu, &mut adam.m_mu, &mut adam.v_mu, &est.grad_mu);
    update(&mut state.log_sigma, &mut adam.m_ls, &mut adam.v_ls, &est.grad_log_sigma);
    if state.mu.iter().chain(&state.log_sigma).flatten().any(|v| !v.is_finite()) {
        return Err(GigError::ElboDivergence { iteration });
    }
    Ok(est.elbo)
}

/// Proximal-gradient descent on `E(γ⁰ + μ)` starting from `mu`.
///
/// The distance terms are handled by their exact proximal map (group soft
/// threshold), the gradient-norm term by a gradient step; the step size is
/// halved until the energy does not increase, so the energy is monotone.
fn refine_mean(
    model: &MlpModel,
    target: &ScalarTarget,
    gamma0: &[Vec<f64>],
    mut mu: Vec<Vec<f64>>,
    config: &EnergyPathConfig,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = gamma0.len();
    let ends = config.endpoint_count(n);
    let points = |mu: &[Vec<f64>]| -> Vec<Vec<f64>> {
        gamma0
            .iter()
            .zip(mu)
            .map(|(p, m)| p.iter().zip(m).map(|(a, b)| a + b).collect())
            .collect()
    };
    let eval = |mu: &[Vec<f64>]| {
        energy(model, target, &points(mu), gamma0, config.beta, config.endpoint_weight, config.endpoint_fraction)
    };
    let mut current = eval(&mu)?;
    let mut step = config.learning_rate.max(1e-6);
    for _ in 0..config.refine_iters {
        // Gradient of the smooth part -β Σ ||∇f(γ_i)||.
        let smooth_grad: Vec<Vec<f64>> = points(&mu)
            .iter()
            .map(|p| {
                if config.beta == 0.0 {
                    Ok(vec![0.0; p.len()])
                } else {
                    model
                        .gradient_norm_and_gradient(p, target)
                        .map(|(_, dc)| dc.iter().map(|v| -config.beta * v).collect())
                }
            })
            .collect::<Result<_>>()?;
        let mut accepted = false;
        while step > 1e-12 {
            let candidate: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    if config.clamp_endpoints && (i == 0 || i + 1 == n) {
                        return vec![0.0; mu[i].len()];
                    }
                    let weight = if is_endpoint(i, n, ends) { 1.0 + config.endpoint_weight } else { 1.0 };
                    let v: Vec<f64> = mu[i].iter().zip(&smooth_grad[i]).map(|(m, g)| m - step * g).collect();
                    let norm = l2_norm(&v);
                    let shrink = if norm > 0.0 { (1.0 - step * weight / norm).max(0.0) } else { 0.0 };
                    v.into_iter().map(|x| x * shrink).collect()
                })
                .collect();
            let e = eval(&candidate)?;
            if e <= current {
                let unchanged = candidate == mu;
                mu = candidate;
                current = e;
                accepted = !unchanged;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((mu, current))
}

/// One row of the optional optimization trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub elbo: f64,
    pub energy_mean_path: f64,
    pub endpoint_drift: f64,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iter", "elbo", "energy_mean_path", "endpoint_drift"])?;
    for r in rows {
        w.write_record([
            r.iter.to_string(),
            r.elbo.to_string(),
            r.energy_mean_path.to_string(),
            r.endpoint_drift.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct OptimizedPath {
    /// Mean path `γ⁰ + μ`, baseline end first.
    pub points: Vec<Vec<f64>>,
    pub state: VariationalPathState,
    pub energy_straight: f64,
    pub energy_optimized: f64,
    /// Largest distance of the first/last point from the baseline/input.
    pub endpoint_drift: f64,
    /// Set when the drift exceeds `1e-2 · ||x − x̄||`.
    pub drift_warning: Option<String>,
    pub trace: Vec<TraceRow>,
}

fn endpoint_drift(points: &[Vec<f64>], baseline: &[f64], input: &[f64]) -> f64 {
    distance(&points[0], baseline).max(distance(&points[points.len() - 1], input))
}

/// Fits the variational path and returns its refined mean.
///
/// `record_trace` stores one [`TraceRow`] per iteration, which costs an extra
/// energy evaluation each time.
pub fn optimize_path(
    model: &MlpModel,
    target: &ScalarTarget,
    input: &[f64],
    baseline: &[f64],
    config: &EnergyPathConfig,
    record_trace: bool,
) -> Result<OptimizedPath> {
    config.validate()?;
    check_dim(model.input_dim(), input.len())?;
    check_dim(input.len(), baseline.len())?;
    let gamma0 = straight_points(baseline, input, config.n_points);
    let e = |pts: &[Vec<f64>]| {
        energy(model, target, pts, &gamma0, config.beta, config.endpoint_weight, config.endpoint_fraction)
    };
    let energy_straight = e(&gamma0)?;
    let mut state = VariationalPathState::new(gamma0.clone(), config.init_scale);
    if input == baseline {
        return Ok(OptimizedPath {
            points: gamma0,
            state,
            energy_straight,
            energy_optimized: energy_straight,
            endpoint_drift: 0.0,
            drift_warning: None,
            trace: Vec::new(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = Vec::new();
    for iter in 0..config.iters {
        let elbo = elbo_step(&mut state, model, target, config, &mut rng)?;
        if record_trace {
            let mean = state.mean_path();
            trace.push(TraceRow {
                iter,
                elbo,
                energy_mean_path: e(&mean)?,
                endpoint_drift: endpoint_drift(&mean, baseline, input),
            });
        }
    }

    let (mut mu, mut energy_optimized) = refine_mean(model, target, &gamma0, state.mu.clone(), config)?;
    if energy_optimized > energy_straight {
        // The stochastic phase ended in a worse basin; descend from the straight line instead.
        let zeros = gamma0.iter().map(|p| vec![0.0; p.len()]).collect();
        (mu, energy_optimized) = refine_mean(model, target, &gamma0, zeros, config)?;
    }
    state.mu = mu;
    let points = state.mean_path();
    let drift = endpoint_drift(&points, baseline, input);
    let tolerance = 1e-2 * distance(input, baseline);
    let drift_warning = (drift > tolerance)
        .then(|| format!("endpoint drift {drift:.3e} exceeds tolerance {tolerance:.3e}"));
    Ok(OptimizedPath {
        points,
        state,
        energy_straight,
        energy_optimized,
        endpoint_drift: drift,
        drift_warning,
        trace,
    })
}

/// Attribution along the optimized mean path, `steps` samples per segment.
///
/// Residuals are measured against the true input and baseline, so endpoint
/// drift shows up as a completeness error.
pub fn geodesic_ig_energy(
    model: &MlpModel,
    target: &ScalarTarget,
    input: &[f64],
    baseline: &[f64],
    config: &EnergyPathConfig,
    steps: usize,
) -> Result<(Attribution, Path, OptimizedPath)> {
    let optimized = optimize_path(model, target, input, baseline, config, false)?;
    let path = Path::new(optimized.points.clone(), steps)?;
    if input == baseline {
        let f = model.scalar_output(input, target)?;
        return Ok((Attribution::zero(input.len(), f), path, optimized));
    }
    let along = path_attribution(model, target, &path)?;
    let attribution = Attribution::new(
        along.values,
        model.scalar_output(input, target)?,
        model.scalar_output(baseline, target)?,
        along.path_length_estimate,
    );
    Ok((attribution, path, optimized))
}
