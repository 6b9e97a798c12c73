// SPDX-License-Identifier: MIT OR Apache-2.0

//! Comparison attribution methods and a tag-based dispatcher over all methods.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffnet::{MlpModel, ScalarTarget};
use crate::error::{check_dim, GigError, Result};
use crate::geodesic_energy::{geodesic_ig_energy, EnergyPathConfig};
use crate::geodesic_knn::{KnnConfig, PathGraph};
use crate::graph::{EuclideanMetric, GradientMetric};
use crate::path::{integrated_gradients, Attribution};

/// `x ⊙ ∇f(x)`; residuals are measured against the zero baseline.
pub fn input_x_gradient(model: &MlpModel, target: &ScalarTarget, x: &[f64]) -> Result<Attribution> {
    let (f_input, grad) = model.value_and_gradient(x, target)?;
    let values = x.iter().zip(&grad).map(|(a, g)| a * g).collect();
    let f_zero = model.scalar_output(&vec![0.0; x.len()], target)?;
    Ok(Attribution::new(values, f_input, f_zero, 0.0))
}

/// Expected gradients over noisy interpolants: the mean of
/// `(x − x̄) ⊙ ∇f(x̄ + α(x − x̄) + ε)` with `α ~ U(0, 1)`, `ε ~ N(0, σ² I)`.
pub fn gradient_shap(
    model: &MlpModel,
    target: &ScalarTarget,
    x: &[f64],
    baseline: &[f64],
    n_samples: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Attribution> {
    check_dim(x.len(), baseline.len())?;
    if n_samples == 0 {
        return Err(GigError::Argument("gradient_shap needs n_samples >= 1".into()));
    }
    if !(noise_sigma >= 0.0) {
        return Err(GigError::Argument("gradient_shap: noise_sigma must be >= 0".into()));
    }
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| GigError::Argument(e.to_string()))?;
    let alpha = Uniform::new(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; x.len()];
    for _ in 0..n_samples {
        let a = alpha.sample(&mut rng);
        let p: Vec<f64> = x
            .iter()
            .zip(baseline)
            .map(|(xi, bi)| bi + a * (xi - bi) + noise.sample(&mut rng))
            .collect();
        let g = model.input_gradient(&p, target)?;
        for (s, gi) in acc.iter_mut().zip(&g) {
            *s += gi;
        }
    }
    let values = x
        .iter()
        .zip(baseline)
        .zip(&acc)
        .map(|((xi, bi), s)| (xi - bi) * s / n_samples as f64)
        .collect();
    Ok(Attribution::new(
        values,
        model.scalar_output(x, target)?,
        model.scalar_output(baseline, target)?,
        0.0,
    ))
}

/// Single-feature occlusion: `A_i = f(x) − f(x with x_i ← x̄_i)`.
pub fn occlusion(model: &MlpModel, target: &ScalarTarget, x: &[f64], baseline: &[f64]) -> Result<Attribution> {
    check_dim(x.len(), baseline.len())?;
    let f_input = model.scalar_output(x, target)?;
    let values = (0..x.len())
        .map(|i| {
            let mut occluded = x.to_vec();
            occluded[i] = baseline[i];
            model.scalar_output(&occluded, target).map(|f| f_input - f)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Attribution::new(values, f_input, model.scalar_output(baseline, target)?, 0.0))
}

/// Gradients integrated along the Euclidean shortest path through the kNN
/// graph of `{baseline, x} ∪ samples`; the path ignores the model.
pub fn enhanced_ig(
    model: &MlpModel,
    target: &ScalarTarget,
    x: &[f64],
    baseline: &[f64],
    samples: &[Vec<f64>],
    config: &KnnConfig,
) -> Result<Attribution> {
    let graph = PathGraph::new(baseline, samples, &[x.to_vec()], config.k, &EuclideanMetric)?;
    Ok(graph.attribute(model, target, 0, config.attribution_steps)?.0)
}

/// I.i.d. standard normal attributions.
pub fn random_attribution(
    model: &MlpModel,
    target: &ScalarTarget,
    x: &[f64],
    baseline: &[f64],
    seed: u64,
) -> Result<Attribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = x.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(Attribution::new(
        values,
        model.scalar_output(x, target)?,
        model.scalar_output(baseline, target)?,
        0.0,
    ))
}

/// SplitMix64 finalizer, used to derive per-input seeds from a run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// An attribution method together with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodConfig {
    Ig {
        steps: usize,
    },
    InputXGradient,
    GradientShap {
        n_samples: usize,
        noise_sigma: f64,
    },
    Occlusion,
    EnhancedIg {
        k: usize,
        steps: usize,
    },
    Random,
    GeodesicKnn(KnnConfig),
    GeodesicSvi {
        #[serde(flatten)]
        config: EnergyPathConfig,
        steps: usize,
    },
}

impl MethodConfig {
    pub const TAGS: [&'static str; 8] = [
        "ig",
        "input_x_gradient",
        "gradient_shap",
        "occlusion",
        "enhanced_ig",
        "random",
        "geodesic_knn",
        "geodesic_svi",
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Ig { .. } => "ig",
            Self::InputXGradient => "input_x_gradient",
            Self::GradientShap { .. } => "gradient_shap",
            Self::Occlusion => "occlusion",
            Self::EnhancedIg { .. } => "enhanced_ig",
            Self::Random => "random",
            Self::GeodesicKnn(_) => "geodesic_knn",
            Self::GeodesicSvi { .. } => "geodesic_svi",
        }
    }

    /// Default parameters for `tag`.
    pub fn from_tag(tag: &str) -> Result<Self> {
        let knn = KnnConfig::default();
        Ok(match tag {
            "ig" => Self::Ig { steps: 512 },
            "input_x_gradient" => Self::InputXGradient,
            "gradient_shap" => Self::GradientShap {
                n_samples: 64,
                noise_sigma: 0.0,
            },
            "occlusion" => Self::Occlusion,
            "enhanced_ig" => Self::EnhancedIg {
                k: knn.k,
                steps: knn.attribution_steps,
            },
            "random" => Self::Random,
            "geodesic_knn" => Self::GeodesicKnn(knn),
            "geodesic_svi" => Self::GeodesicSvi {
                config: EnergyPathConfig::default(),
                steps: 16,
            },
            other => {
                return Err(GigError::Argument(format!(
                    "unknown method '{other}' (expected one of {})",
                    Self::TAGS.join(", ")
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(GigError::Argument(format!("{}: {name} must be >= 1", self.tag())))
            } else {
                Ok(())
            }
        };
        match self {
            Self::Ig { steps } => positive("steps", *steps),
            Self::GradientShap { n_samples, noise_sigma } => {
                positive("n_samples", *n_samples)?;
                if *noise_sigma >= 0.0 {
                    Ok(())
                } else {
                    Err(GigError::Argument("gradient_shap: noise_sigma must be >= 0".into()))
                }
            }
            Self::EnhancedIg { k, steps } => {
                positive("k", *k)?;
                positive("steps", *steps)
            }
            Self::GeodesicKnn(c) => {
                positive("k", c.k)?;
                positive("edge_steps", c.edge_steps)?;
                positive("attribution_steps", c.attribution_steps)
            }
            Self::GeodesicSvi { config, steps } => {
                positive("steps", *steps)?;
                config.validate()
            }
            Self::InputXGradient | Self::Occlusion | Self::Random => Ok(()),
        }
    }

    /// Attributions for a batch of inputs sharing one baseline.
    ///
    /// `targets[i]` is the scalar explained for `inputs[i]`. Graph methods
    /// build one graph over `{baseline} ∪ samples ∪ inputs`, weighted for
    /// `graph_target`. Stochastic methods draw from a stream derived from
    /// `(seed, i)`, so results do not depend on batch composition order or
    /// thread count.
    #[allow(clippy::too_many_arguments)]
    pub fn attribute_batch(
        &self,
        model: &MlpModel,
        inputs: &[Vec<f64>],
        targets: &[ScalarTarget],
        graph_target: &ScalarTarget,
        baseline: &[f64],
        samples: &[Vec<f64>],
        seed: u64,
    ) -> Result<Vec<Attribution>> {
        self.validate()?;
        check_dim(inputs.len(), targets.len())?;
        match self {
            Self::EnhancedIg { k, steps } => {
                let graph = PathGraph::new(baseline, samples, inputs, *k, &EuclideanMetric)?;
                graph.attribute_all(model, targets, *steps)
            }
            Self::GeodesicKnn(c) => {
                let metric = GradientMetric {
                    model,
                    target: *graph_target,
                    steps: c.edge_steps,
                };
                let graph = PathGraph::new(baseline, samples, inputs, c.k, &metric)?;
                graph.attribute_all(model, targets, c.attribution_steps)
            }
            _ => inputs
                .par_iter()
                .zip(targets)
                .enumerate()
                .map(|(i, (x, t))| self.attribute_one(model, t, x, baseline, derive_seed(seed, i as u64)))
                .collect(),
        }
    }

    /// Attribution of one input for the path-free and per-pair methods.
    /// Graph methods use an empty sample set here.
    pub fn attribute_one(
        &self,
        model: &MlpModel,
        target: &ScalarTarget,
        x: &[f64],
        baseline: &[f64],
        seed: u64,
    ) -> Result<Attribution> {
        match self {
            Self::Ig { steps } => integrated_gradients(model, target, x, baseline, *steps),
            Self::InputXGradient => input_x_gradient(model, target, x),
            Self::GradientShap { n_samples, noise_sigma } => {
                gradient_shap(model, target, x, baseline, *n_samples, *noise_sigma, seed)
            }
            Self::Occlusion => occlusion(model, target, x, baseline),
            Self::Random => random_attribution(model, target, x, baseline, seed),
            Self::EnhancedIg { k, steps } => enhanced_ig(
                model,
                target,
                x,
                baseline,
                &[],
                &KnnConfig {
                    k: *k,
                    attribution_steps: *steps,
                    ..KnnConfig::default()
                },
            ),
            Self::GeodesicKnn(c) => crate::geodesic_knn::geodesic_ig_knn(model, target, x, baseline, &[], c).map(|r| r.0),
            Self::GeodesicSvi { config, steps } => {
                let config = EnergyPathConfig { seed, ..config.clone() };
                geodesic_ig_energy(model, target, x, baseline, &config, *steps).map(|r| r.0)
            }
        }
    }
}

impl fmt::Display for MethodConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for MethodConfig {
    type Err = GigError;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_tag(s)
    }
}
