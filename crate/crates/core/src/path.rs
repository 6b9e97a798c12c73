// SPDX-License-Identifier: MIT OR Apache-2.0

//! Piecewise-linear paths and midpoint-rule path integrals of the gradient.
//!
//! Every path method in the crate reduces to [`path_attribution`]: the
//! attribution of feature `i` is the sum over segments `a -> b` of
//! `(b_i - a_i) * mean_k d f / d x_i (a + (k + 1/2)/m (b - a))`.

use std::io::Write;

use crate::diffnet::{l2_norm, MlpModel, ScalarTarget};
use crate::error::{check_dim, GigError, Result};

/// Anchors from baseline (first) to input (last), integrated with
/// `steps_per_segment` midpoint samples per segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    anchors: Vec<Vec<f64>>,
    steps_per_segment: usize,
}

impl Path {
    pub fn new(anchors: Vec<Vec<f64>>, steps_per_segment: usize) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(GigError::Argument("a path needs at least 2 anchors".into()));
        }
        if steps_per_segment == 0 {
            return Err(GigError::Argument("steps per segment must be >= 1".into()));
        }
        let d = anchors[0].len();
        for a in &anchors[1..] {
            check_dim(d, a.len())?;
        }
        Ok(Self {
            anchors,
            steps_per_segment,
        })
    }

    pub fn straight(baseline: &[f64], input: &[f64], steps: usize) -> Result<Self> {
        Self::new(vec![baseline.to_vec(), input.to_vec()], steps)
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn steps_per_segment(&self) -> usize {
        self.steps_per_segment
    }

    pub fn baseline(&self) -> &[f64] {
        &self.anchors[0]
    }

    pub fn input(&self) -> &[f64] {
        &self.anchors[self.anchors.len() - 1]
    }

    pub fn dim(&self) -> usize {
        self.anchors[0].len()
    }

    pub fn segments(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.anchors.windows(2).map(|w| (w[0].as_slice(), w[1].as_slice()))
    }

    pub fn euclidean_length(&self) -> f64 {
        self.segments().map(|(a, b)| distance(a, b)).sum()
    }

    /// Writes the anchors as CSV rows `x0,x1,...`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((0..self.dim()).map(|i| format!("x{i}")))?;
        for a in &self.anchors {
            w.write_record(a.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-feature attributions of one input together with their axiom residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct Attribution {
    pub values: Vec<f64>,
    pub f_input: f64,
    pub f_baseline: f64,
    pub completeness_residual: f64,
    pub strong_completeness_residual: f64,
    /// Gradient-weighted length of the integration path; zero for path-free methods.
    pub path_length_estimate: f64,
}

impl Attribution {
    pub fn new(values: Vec<f64>, f_input: f64, f_baseline: f64, path_length_estimate: f64) -> Self {
        Self {
            completeness_residual: completeness_residual(&values, f_input, f_baseline),
            strong_completeness_residual: strong_completeness_residual(&values, f_input, f_baseline),
            values,
            f_input,
            f_baseline,
            path_length_estimate,
        }
    }

    /// The all-zero attribution of an input that coincides with its baseline.
    pub fn zero(dim: usize, f_value: f64) -> Self {
        Self::new(vec![0.0; dim], f_value, f_value, 0.0)
    }

    /// `sum_i |A_i|`, the ranking score used by purity.
    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `|sum_i A_i - (f(x) - f(x_bar))|`.
pub fn completeness_residual(values: &[f64], f_input: f64, f_baseline: f64) -> f64 {
    (values.iter().sum::<f64>() - (f_input - f_baseline)).abs()
}

/// `|sum_i |A_i| - |f(x) - f(x_bar)||`.
pub fn strong_completeness_residual(values: &[f64], f_input: f64, f_baseline: f64) -> f64 {
    (values.iter().map(|v| v.abs()).sum::<f64>() - (f_input - f_baseline).abs()).abs()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// The `m + 1` points `a + (k/m)(b - a)`, `k = 0..=m`.
pub fn interpolate(a: &[f64], b: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
    check_dim(a.len(), b.len())?;
    if m == 0 {
        return Err(GigError::Argument("interpolation needs m >= 1".into()));
    }
    Ok((0..=m)
        .map(|k| if k == m { b.to_vec() } else { lerp(a, b, k as f64 / m as f64) })
        .collect())
}

/// Midpoint samples `a + ((k + 1/2)/m)(b - a)`, `k = 0..m`.
fn midpoints<'a>(a: &'a [f64], b: &'a [f64], m: usize) -> impl Iterator<Item = Vec<f64>> + 'a {
    (0..m).map(move |k| lerp(a, b, (k as f64 + 0.5) / m as f64))
}

/// Integrates one segment, returning the per-feature attribution and the
/// gradient-weighted length `||b - a|| * mean_k ||grad f||` from the same samples.
fn integrate_segment(
    model: &MlpModel,
    target: &ScalarTarget,
    a: &[f64],
    b: &[f64],
    m: usize,
) -> Result<(Vec<f64>, f64)> {
    check_dim(a.len(), b.len())?;
    if m == 0 {
        return Err(GigError::Argument("segment integration needs m >= 1".into()));
    }
    let mut grad_sum = vec![0.0; a.len()];
    let mut norm_sum = 0.0;
    for p in midpoints(a, b, m) {
        let g = model.input_gradient(&p, target)?;
        norm_sum += l2_norm(&g);
        for (s, gi) in grad_sum.iter_mut().zip(&g) {
            *s += gi;
        }
    }
    let mf = m as f64;
    let values = a
        .iter()
        .zip(b)
        .zip(&grad_sum)
        .map(|((ai, bi), s)| (bi - ai) * (s / mf))
        .collect();
    Ok((values, distance(a, b) * (norm_sum / mf)))
}

/// `(b - a) ⊙ mean_k grad f(midpoint_k)`.
pub fn segment_attribution(
    model: &MlpModel,
    target: &ScalarTarget,
    a: &[f64],
    b: &[f64],
    m: usize,
) -> Result<Vec<f64>> {
    Ok(integrate_segment(model, target, a, b, m)?.0)
}

/// `||b - a|| * mean_k ||grad f(midpoint_k)||`: the gradient-weighted length of a straight segment.
pub fn gradient_weighted_length(
    model: &MlpModel,
    target: &ScalarTarget,
    a: &[f64],
    b: &[f64],
    m: usize,
) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    if m == 0 {
        return Err(GigError::Argument("segment integration needs m >= 1".into()));
    }
    let len = distance(a, b);
    if len == 0.0 {
        return Ok(0.0);
    }
    let norm_sum = midpoints(a, b, m)
        .map(|p| model.input_gradient(&p, target).map(|g| l2_norm(&g)))
        .sum::<Result<f64>>()?;
    Ok(len * (norm_sum / m as f64))
}

/// Attribution along `path`, summing segment integrals in path order.
pub fn path_attribution(model: &MlpModel, target: &ScalarTarget, path: &Path) -> Result<Attribution> {
    check_dim(model.input_dim(), path.dim())?;
    let mut values = vec![0.0; path.dim()];
    let mut length = 0.0;
    for (a, b) in path.segments() {
        let (seg, seg_len) = integrate_segment(model, target, a, b, path.steps_per_segment)?;
        for (v, s) in values.iter_mut().zip(&seg) {
            *v += s;
        }
        length += seg_len;
    }
    let f_input = model.scalar_output(path.input(), target)?;
    let f_baseline = model.scalar_output(path.baseline(), target)?;
    Ok(Attribution::new(values, f_input, f_baseline, length))
}

/// Straight-path integrated gradients with `steps` midpoint samples.
pub fn integrated_gradients(
    model: &MlpModel,
    target: &ScalarTarget,
    input: &[f64],
    baseline: &[f64],
    steps: usize,
) -> Result<Attribution> {
    path_attribution(model, target, &Path::straight(baseline, input, steps)?)
}

/// One row group per attribution in the shared CSV schema.
pub struct AttributionCsv<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> AttributionCsv<W> {
    pub const HEADER: [&'static str; 8] = [
        "input_id",
        "feature_index",
        "value",
        "f_input",
        "f_baseline",
        "completeness_residual",
        "strong_completeness_residual",
        "method",
    ];

    pub fn new(writer: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(writer);
        writer.write_record(Self::HEADER)?;
        Ok(Self { writer })
    }

    pub fn write(&mut self, input_id: usize, attribution: &Attribution, method: &str) -> Result<()> {
        for (i, v) in attribution.values.iter().enumerate() {
            self.writer.write_record([
                input_id.to_string(),
                i.to_string(),
                v.to_string(),
                attribution.f_input.to_string(),
                attribution.f_baseline.to_string(),
                attribution.completeness_residual.to_string(),
                attribution.strong_completeness_residual.to_string(),
                method.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.writer.flush()?;
        self.writer
            .into_inner()
            .map_err(|e| GigError::Io(e.into_error()))
    }
}
