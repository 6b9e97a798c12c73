// SPDX-License-Identifier: MIT OR Apache-2.0

//! Faithfulness and axiom metrics.

use crate::diffnet::{MlpModel, ScalarTarget};
use crate::error::{check_dim, GigError, Result};
use crate::path::Attribution;

/// Indices sorted by descending score; ties keep ascending index order.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Fraction of the top `ceil(N/2)` points, ranked by `scores`, whose predicted label is 1.
pub fn purity_from_scores(scores: &[f64], predicted: &[usize]) -> Result<f64> {
    check_dim(scores.len(), predicted.len())?;
    if scores.len() < 2 {
        return Err(GigError::Argument("purity needs at least 2 points".into()));
    }
    let top = scores.len().div_ceil(2);
    let ones = rank_descending(scores)[..top]
        .iter()
        .filter(|&&i| predicted[i] == 1)
        .count();
    Ok(ones as f64 / top as f64)
}

/// Purity of `attributions` on `points`: points are ranked by `Σ_i |A_i|` and
/// labelled by the model's argmax prediction.
pub fn purity(model: &MlpModel, attributions: &[Attribution], points: &[Vec<f64>]) -> Result<f64> {
    check_dim(points.len(), attributions.len())?;
    let predicted = points.iter().map(|p| model.predict(p)).collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = attributions.iter().map(Attribution::abs_sum).collect();
    purity_from_scores(&scores, &predicted)
}

/// Trapezoidal area under `values` over `grid`.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> Result<f64> {
    check_dim(grid.len(), values.len())?;
    if grid.len() < 2 {
        return Err(GigError::Argument("need at least 2 grid points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GigError::Argument("grid must be strictly increasing".into()));
    }
    Ok(grid
        .windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| (g[1] - g[0]) * (v[0] + v[1]) / 2.0)
        .sum())
}

/// Trapezoidal area of purity over the noise grid divided by the grid span.
pub fn purity_auc(noise_grid: &[f64], purity: &[f64]) -> Result<f64> {
    let area = trapezoid(noise_grid, purity)?;
    Ok(area / (noise_grid[noise_grid.len() - 1] - noise_grid[0]))
}

/// `x` with its top `ceil(k% · d)` features by `|A|` replaced by `fill`.
/// Ties go to the lower feature index.
pub fn mask_top_features(x: &[f64], attribution: &[f64], k_percent: f64, fill: &[f64]) -> Result<Vec<f64>> {
    check_dim(x.len(), attribution.len())?;
    check_dim(x.len(), fill.len())?;
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(GigError::Argument(format!("k_percent must lie in (0, 100], got {k_percent}")));
    }
    let count = ((k_percent / 100.0 * x.len() as f64).ceil() as usize).min(x.len());
    let scores: Vec<f64> = attribution.iter().map(|a| a.abs()).collect();
    let mut masked = x.to_vec();
    for &i in &rank_descending(&scores)[..count] {
        masked[i] = fill[i];
    }
    Ok(masked)
}

/// Drop in the target probability after masking the top `k_percent` features.
///
/// The target is read in probability space regardless of `target.space`.
pub fn comprehensiveness(
    model: &MlpModel,
    target: &ScalarTarget,
    x: &[f64],
    attribution: &[f64],
    k_percent: f64,
    mask_fill: &[f64],
) -> Result<f64> {
    let prob = ScalarTarget::probability(target.class_index);
    let masked = mask_top_features(x, attribution, k_percent, mask_fill)?;
    Ok(model.scalar_output(x, &prob)? - model.scalar_output(&masked, &prob)?)
}

const LOG_ODDS_CLAMP: f64 = 1e-12;

fn logit(p: f64) -> f64 {
    let p = p.clamp(LOG_ODDS_CLAMP, 1.0 - LOG_ODDS_CLAMP);
    (p / (1.0 - p)).ln()
}

/// Change in log-odds of the target probability after masking. `k_percent = 0` masks nothing.
pub fn log_odds(
    model: &MlpModel,
    target: &ScalarTarget,
    x: &[f64],
    attribution: &[f64],
    k_percent: f64,
    mask_fill: &[f64],
) -> Result<f64> {
    let prob = ScalarTarget::probability(target.class_index);
    let masked = if k_percent == 0.0 {
        x.to_vec()
    } else {
        mask_top_features(x, attribution, k_percent, mask_fill)?
    };
    Ok(logit(model.scalar_output(&masked, &prob)?) - logit(model.scalar_output(x, &prob)?))
}

/// Metric values over a `k%` grid with an area summary.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskCurve {
    pub k_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub summary: f64,
}

/// `1, 2, ..., 65` percent.
pub fn default_k_grid() -> Vec<f64> {
    (1..=65).map(f64::from).collect()
}

fn check_k_grid(k_grid: &[f64]) -> Result<()> {
    if k_grid.iter().any(|&k| !(1.0..=65.0).contains(&k)) {
        return Err(GigError::Argument("k grid must lie within [1, 65]".into()));
    }
    Ok(())
}

/// Area between the curve and zero, with `k` measured as a fraction.
pub fn area_under_curve(k_grid: &[f64], values: &[f64]) -> Result<f64> {
    let fractions: Vec<f64> = k_grid.iter().map(|k| k / 100.0).collect();
    trapezoid(&fractions, values)
}

/// Builds a curve whose summary is the area under it (`over = false`) or over it (`over = true`).
pub fn mask_curve(k_grid: Vec<f64>, values: Vec<f64>, over: bool) -> Result<MaskCurve> {
    check_k_grid(&k_grid)?;
    let area = area_under_curve(&k_grid, &values)?;
    Ok(MaskCurve {
        summary: if over { -area } else { area },
        k_grid,
        values,
    })
}

/// Worst `|A_1 − A_2|` over the probe points, for a model symmetric in features 0 and 1.
///
/// `attribute` is called for each probe with `x_0 = x_1`. The fixture is
/// checked first at an off-diagonal point next to every probe: swapping its
/// two coordinates must not change `f` by more than `1e-12`.
pub fn symmetry_check<F>(
    model: &MlpModel,
    target: &ScalarTarget,
    probes: &[Vec<f64>],
    baseline: &[f64],
    mut attribute: F,
) -> Result<f64>
where
    F: FnMut(&[f64], &[f64]) -> Result<Attribution>,
{
    if baseline.len() < 2 || baseline[0] != baseline[1] {
        return Err(GigError::Argument("baseline must satisfy b_0 = b_1".into()));
    }
    let mut worst = 0.0f64;
    for x in probes {
        if x.len() < 2 || x[0] != x[1] {
            return Err(GigError::Argument("probe must satisfy x_0 = x_1".into()));
        }
        let mut shifted = x.clone();
        shifted[0] += 0.25;
        let mut shifted_swapped = shifted.clone();
        shifted_swapped.swap(0, 1);
        let asym = (model.scalar_output(&shifted, target)? - model.scalar_output(&shifted_swapped, target)?).abs();
        if asym > 1e-12 {
            return Err(GigError::Fixture(asym));
        }
        let a = attribute(x, baseline)?;
        worst = worst.max((a.values[0] - a.values[1]).abs());
    }
    Ok(worst)
}

/// Median by sorting a copy; `NaN` for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolated quantile, `q ∈ [0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
