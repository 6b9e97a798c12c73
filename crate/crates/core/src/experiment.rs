// SPDX-License-Identifier: MIT OR Apache-2.0

//! The half-moons study: generate, split, train, attribute, score.
//!
//! One *cell* is a (noise level, seed) pair. Every random choice inside a cell
//! is derived from its seed, so a cell is reproducible on its own and cells
//! can be evaluated in any order.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::baselines::{derive_seed, MethodConfig};
use crate::data::{make_moons, split, Dataset};
use crate::diffnet::{train, MlpModel, OutputSpace, ScalarTarget, TrainConfig, TrainReport};
use crate::error::{GigError, Result};
use crate::geodesic_knn::straight_line_samples;
use crate::metrics::{self, median, quantile};
use crate::path::Attribution;

/// Which dataset points, besides the baseline and the test inputs, become graph nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSamples {
    /// Training points (the test points are always nodes).
    #[default]
    Train,
    /// Only the test points.
    TestOnly,
    /// `per_input` jittered points on the straight segment from the baseline
    /// to every test point.
    Generated { per_input: usize, jitter: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_points: usize,
    pub train_fraction: f64,
    pub baseline: Vec<f64>,
    pub hidden_layers: Vec<usize>,
    pub train: TrainConfig,
    /// Attributions explain the predicted class in this space.
    pub space: OutputSpace,
    pub graph_samples: GraphSamples,
    /// Evaluate only the first `n` test points.
    pub max_test_points: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_points: 10_000,
            train_fraction: 0.8,
            baseline: vec![-0.5, -0.5],
            hidden_layers: vec![64, 64],
            train: TrainConfig::default(),
            space: OutputSpace::Probability,
            graph_samples: GraphSamples::Train,
            max_test_points: None,
        }
    }
}

/// `{0.05, 0.15, ..., 0.65}`.
pub fn default_noise_grid() -> Vec<f64> {
    (0..7).map(|i| (5.0 + 10.0 * f64::from(i)) / 100.0).collect()
}

/// Everything one cell needs to evaluate attribution methods.
#[derive(Clone, Debug)]
pub struct PreparedCell {
    pub noise: f64,
    pub seed: u64,
    pub train: Dataset,
    pub test: Dataset,
    pub model: MlpModel,
    /// `None` when the model was supplied rather than trained here.
    pub report: Option<TrainReport>,
    pub test_accuracy: f64,
    pub baseline: Vec<f64>,
    /// Predicted-class target for every test point.
    pub targets: Vec<ScalarTarget>,
    pub predicted: Vec<usize>,
    graph_target: ScalarTarget,
    graph_samples: GraphSamples,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.baseline.len() != 2 {
            return Err(GigError::Argument("baseline must be 2-dimensional".into()));
        }
        if self.hidden_layers.contains(&0) {
            return Err(GigError::Argument("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(2).chain(self.hidden_layers.iter().copied()).chain(std::iter::once(2)).collect()
    }

    fn data(&self, noise: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        let data = make_moons(self.n_points, noise, derive_seed(seed, 0))?;
        let (train_set, mut test) = split(&data, self.train_fraction, derive_seed(seed, 1))?;
        if let Some(max) = self.max_test_points {
            test.points.truncate(max);
            test.labels.truncate(max);
        }
        Ok((train_set, test))
    }

    /// Data, split and trained model for `(noise, seed)`.
    pub fn prepare(&self, noise: f64, seed: u64) -> Result<PreparedCell> {
        let (train_set, test) = self.data(noise, seed)?;
        let init = MlpModel::init(&self.layer_sizes(), derive_seed(seed, 2))?;
        let train_config = TrainConfig {
            seed: derive_seed(seed, 3),
            ..self.train.clone()
        };
        let (model, report) = train(&init, &train_set.points, &train_set.labels, &train_config)?;
        self.finish(noise, seed, train_set, test, model, Some(report))
    }

    /// Like [`prepare`](Self::prepare) but with an already trained model.
    pub fn prepare_with_model(&self, noise: f64, seed: u64, model: MlpModel) -> Result<PreparedCell> {
        if model.input_dim() != 2 || model.num_classes() != 2 {
            return Err(GigError::Argument(format!(
                "model maps {} inputs to {} classes; the moons task needs 2 -> 2",
                model.input_dim(),
                model.num_classes()
            )));
        }
        let (train_set, test) = self.data(noise, seed)?;
        self.finish(noise, seed, train_set, test, model, None)
    }

    fn finish(
        &self,
        noise: f64,
        seed: u64,
        train_set: Dataset,
        test: Dataset,
        model: MlpModel,
        report: Option<TrainReport>,
    ) -> Result<PreparedCell> {
        let predicted = test.points.iter().map(|p| model.predict(p)).collect::<Result<Vec<_>>>()?;
        let correct = predicted.iter().zip(&test.labels).filter(|(p, y)| p == y).count();
        let space = self.space;
        let targets = predicted
            .iter()
            .map(|&class_index| ScalarTarget { class_index, space })
            .collect();
        Ok(PreparedCell {
            noise,
            seed,
            test_accuracy: correct as f64 / test.len().max(1) as f64,
            train: train_set,
            test,
            model,
            report,
            baseline: self.baseline.clone(),
            targets,
            predicted,
            graph_target: ScalarTarget { class_index: 1, space },
            graph_samples: self.graph_samples,
        })
    }
}

impl PreparedCell {
    fn graph_samples(&self) -> Result<Cow<'_, [Vec<f64>]>> {
        match self.graph_samples {
            GraphSamples::Train => Ok(Cow::Borrowed(&self.train.points)),
            GraphSamples::TestOnly => Ok(Cow::Owned(Vec::new())),
            GraphSamples::Generated { per_input, jitter } => {
                let mut out = Vec::with_capacity(per_input * self.test.len());
                for (i, x) in self.test.points.iter().enumerate() {
                    let seed = derive_seed(derive_seed(self.seed, 5), i as u64);
                    out.extend(straight_line_samples(&self.baseline, x, per_input, jitter, seed)?);
                }
                Ok(Cow::Owned(out))
            }
        }
    }

    /// Attributions of every test point.
    pub fn attribute(&self, method: &MethodConfig) -> Result<Vec<Attribution>> {
        method.attribute_batch(
            &self.model,
            &self.test.points,
            &self.targets,
            &self.graph_target,
            &self.baseline,
            &self.graph_samples()?,
            derive_seed(self.seed, 4),
        )
    }

    pub fn purity(&self, attributions: &[Attribution]) -> Result<f64> {
        let scores: Vec<f64> = attributions.iter().map(Attribution::abs_sum).collect();
        metrics::purity_from_scores(&scores, &self.predicted)
    }

    /// Mean comprehensiveness and log-odds over the test set for each `k%`.
    pub fn mask_curves(&self, attributions: &[Attribution], k_grid: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
        let n = self.test.len() as f64;
        k_grid
            .iter()
            .map(|&k| {
                let mut comp = 0.0;
                let mut lo = 0.0;
                for ((x, t), a) in self.test.points.iter().zip(&self.targets).zip(attributions) {
                    comp += metrics::comprehensiveness(&self.model, t, x, &a.values, k, &self.baseline)?;
                    lo += metrics::log_odds(&self.model, t, x, &a.values, k, &self.baseline)?;
                }
                Ok((k, comp / n, lo / n))
            })
            .collect()
    }
}

/// Residual statistics of one method over a test set.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSummary {
    pub completeness_median: f64,
    pub completeness_p95: f64,
    pub strong_median: f64,
    pub strong_p95: f64,
    /// Median `|f(x) − f(x̄)|`, the scale both residuals should be read against.
    pub output_change_median: f64,
}

pub fn summarize_residuals(attributions: &[Attribution]) -> ResidualSummary {
    let comp: Vec<f64> = attributions.iter().map(|a| a.completeness_residual).collect();
    let strong: Vec<f64> = attributions.iter().map(|a| a.strong_completeness_residual).collect();
    let change: Vec<f64> = attributions.iter().map(|a| (a.f_input - a.f_baseline).abs()).collect();
    ResidualSummary {
        completeness_median: median(&comp),
        completeness_p95: quantile(&comp, 0.95),
        strong_median: median(&strong),
        strong_p95: quantile(&strong, 0.95),
        output_change_median: median(&change),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PurityRow {
    pub method: String,
    pub noise: f64,
    pub seed: u64,
    pub purity: f64,
}

/// Purity of every method in every `(noise, seed)` cell, in grid order
/// (noise outer, seed middle, method inner).
pub fn purity_sweep(
    config: &ExperimentConfig,
    noise_grid: &[f64],
    seeds: &[u64],
    methods: &[MethodConfig],
    mut on_cell: impl FnMut(&PreparedCell, &[(String, Vec<Attribution>)]),
) -> Result<Vec<PurityRow>> {
    let mut rows = Vec::new();
    for &noise in noise_grid {
        for &seed in seeds {
            let cell = config.prepare(noise, seed)?;
            let mut results = Vec::with_capacity(methods.len());
            for method in methods {
                let attributions = cell.attribute(method)?;
                rows.push(PurityRow {
                    method: method.tag().to_string(),
                    noise,
                    seed,
                    purity: cell.purity(&attributions)?,
                });
                results.push((method.tag().to_string(), attributions));
            }
            on_cell(&cell, &results);
        }
    }
    Ok(rows)
}

/// Per-method AUC-purity for each seed: `(method, seed, auc)`.
pub fn auc_per_seed(rows: &[PurityRow], noise_grid: &[f64]) -> Result<Vec<(String, u64, f64)>> {
    let mut keys: Vec<(String, u64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(m, s)| *m == r.method && *s == r.seed) {
            keys.push((r.method.clone(), r.seed));
        }
    }
    keys.into_iter()
        .map(|(method, seed)| {
            let curve: Vec<f64> = noise_grid
                .iter()
                .map(|&noise| {
                    rows.iter()
                        .find(|r| r.method == method && r.seed == seed && r.noise == noise)
                        .map(|r| r.purity)
                        .ok_or_else(|| GigError::Argument(format!("missing cell {method}/{noise}/{seed}")))
                })
                .collect::<Result<_>>()?;
            Ok((method, seed, metrics::purity_auc(noise_grid, &curve)?))
        })
        .collect()
}
