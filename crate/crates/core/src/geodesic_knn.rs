// SPDX-License-Identifier: MIT OR Apache-2.0

//! Geodesic integrated gradients through a kNN graph.
//!
//! Edges of the kNN graph over `{baseline} ∪ samples ∪ inputs` are weighted by
//! their gradient-weighted length, disconnected components are bridged, and
//! the shortest path from the baseline to each input becomes the anchor
//! sequence of a piecewise-linear integration path. One graph serves every
//! input of a batch: a single shortest-path tree rooted at the baseline yields
//! all paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffnet::{MlpModel, ScalarTarget};
use crate::error::{check_dim, GigError, Result};
use crate::graph::{EdgeMetric, GeodesicGraph, GradientMetric, ShortestPathTree};
use crate::path::{path_attribution, Attribution, Path};

pub use crate::graph::Algorithm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    /// Neighbours per node.
    pub k: usize,
    /// Midpoint samples per edge when weighting the graph.
    pub edge_steps: usize,
    /// Midpoint samples per path segment when integrating attributions.
    pub attribution_steps: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 15,
            edge_steps: 10,
            attribution_steps: 64,
        }
    }
}

/// Gradient-weighted length of the straight edge `a -> b` (`m_edge` midpoint samples).
pub fn edge_weight(model: &MlpModel, target: &ScalarTarget, a: &[f64], b: &[f64], m_edge: usize) -> Result<f64> {
    GradientMetric {
        model,
        target: *target,
        steps: m_edge,
    }
    .weight(a, b)
}

/// `n` points evenly spaced strictly between `baseline` and `input`, each
/// jittered by i.i.d. `N(0, jitter²)` noise. Used as graph nodes when no
/// dataset samples are available.
pub fn straight_line_samples(
    baseline: &[f64],
    input: &[f64],
    n: usize,
    jitter: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_dim(baseline.len(), input.len())?;
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(GigError::Argument(format!("jitter must be finite and >= 0, got {jitter}")));
    }
    let noise = Normal::new(0.0, jitter).map_err(|e| GigError::Argument(format!("jitter: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((1..=n)
        .map(|k| {
            let t = k as f64 / (n + 1) as f64;
            baseline
                .iter()
                .zip(input)
                .map(|(a, b)| a + t * (b - a) + noise.sample(&mut rng))
                .collect()
        })
        .collect())
}

/// A bridged kNN graph rooted at a baseline, shared by a batch of inputs.
pub struct PathGraph {
    graph: GeodesicGraph,
    tree: ShortestPathTree,
    baseline: usize,
    first_input: usize,
    num_inputs: usize,
}

impl PathGraph {
    /// Nodes are laid out as `[baseline, samples.., inputs..]`.
    pub fn new(
        baseline: &[f64],
        samples: &[Vec<f64>],
        inputs: &[Vec<f64>],
        k: usize,
        metric: &dyn EdgeMetric,
    ) -> Result<Self> {
        let d = baseline.len();
        for p in samples.iter().chain(inputs) {
            check_dim(d, p.len())?;
        }
        let nodes: Vec<Vec<f64>> = std::iter::once(baseline.to_vec())
            .chain(samples.iter().cloned())
            .chain(inputs.iter().cloned())
            .collect();
        let mut graph = GeodesicGraph::build(nodes, k, metric)?;
        graph.connect_components(metric)?;
        let tree = graph.shortest_path_tree(0);
        Ok(Self {
            graph,
            tree,
            baseline: 0,
            first_input: 1 + samples.len(),
            num_inputs: inputs.len(),
        })
    }

    pub fn graph(&self) -> &GeodesicGraph {
        &self.graph
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn input_node(&self, input: usize) -> usize {
        self.first_input + input
    }

    /// Graph node sequence from the baseline to input `input`.
    pub fn node_path(&self, input: usize) -> Result<Vec<usize>> {
        if input >= self.num_inputs {
            return Err(GigError::Argument(format!("input index {input} out of range")));
        }
        let sink = self.input_node(input);
        self.tree.path_to(sink).ok_or(GigError::Disconnected {
            source_node: self.baseline,
            sink,
        })
    }

    /// Integration path for input `input` with `steps` samples per segment.
    pub fn path(&self, input: usize, steps: usize) -> Result<Path> {
        let mut anchors: Vec<Vec<f64>> = self
            .node_path(input)?
            .into_iter()
            .map(|v| self.graph.node(v).to_vec())
            .collect();
        if anchors.len() == 1 {
            // Input coincides with the baseline node itself.
            anchors.push(anchors[0].clone());
        }
        Path::new(anchors, steps)
    }

    pub fn attribute(
        &self,
        model: &MlpModel,
        target: &ScalarTarget,
        input: usize,
        steps: usize,
    ) -> Result<(Attribution, Path)> {
        let path = self.path(input, steps)?;
        Ok((path_attribution(model, target, &path)?, path))
    }

    /// Attributes every input in parallel; `targets[i]` is the target for input `i`.
    pub fn attribute_all(
        &self,
        model: &MlpModel,
        targets: &[ScalarTarget],
        steps: usize,
    ) -> Result<Vec<Attribution>> {
        check_dim(self.num_inputs, targets.len())?;
        (0..self.num_inputs)
            .into_par_iter()
            .map(|i| self.attribute(model, &targets[i], i, steps).map(|(a, _)| a))
            .collect()
    }
}

/// Geodesic IG for one input: graph over `{baseline, input} ∪ samples`,
/// gradient-weighted edges, bridges, Dijkstra, then path integration.
pub fn geodesic_ig_knn(
    model: &MlpModel,
    target: &ScalarTarget,
    input: &[f64],
    baseline: &[f64],
    samples: &[Vec<f64>],
    config: &KnnConfig,
) -> Result<(Attribution, Path)> {
    let metric = GradientMetric {
        model,
        target: *target,
        steps: config.edge_steps,
    };
    let graph = PathGraph::new(baseline, samples, &[input.to_vec()], config.k, &metric)?;
    graph.attribute(model, target, 0, config.attribution_steps)
}
