// SPDX-License-Identifier: MIT OR Apache-2.0

//! Undirected weighted kNN graphs over sample points.
//!
//! Construction is exact (all pairs) which is fine at the scale of a few
//! thousand points. Edges are stored once with `i < j`; every query that has to
//! break ties does so by node index, so results are independent of thread
//! scheduling.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::Write;

use rayon::prelude::*;

use crate::diffnet::{MlpModel, ScalarTarget};
use crate::error::{check_dim, GigError, Result};
use crate::path::{distance, gradient_weighted_length};

/// Rule assigning a non-negative length to a straight edge between two points.
pub trait EdgeMetric: Sync {
    fn weight(&self, a: &[f64], b: &[f64]) -> Result<f64>;
}

/// `||a - b|| * mean ||grad f||` over `steps` midpoint samples.
pub struct GradientMetric<'a> {
    pub model: &'a MlpModel,
    pub target: ScalarTarget,
    pub steps: usize,
}

impl EdgeMetric for GradientMetric<'_> {
    fn weight(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        gradient_weighted_length(self.model, &self.target, a, b, self.steps)
    }
}

/// Plain Euclidean edge length (model-agnostic paths).
pub struct EuclideanMetric;

impl EdgeMetric for EuclideanMetric {
    fn weight(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dim(a.len(), b.len())?;
        Ok(distance(a, b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub is_bridge: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    Dijkstra,
    AStar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShortestPathResult {
    pub nodes: Vec<usize>,
    pub total_weight: f64,
}

/// Index pairs `(i, j)`, `i < j`, such that `j` is among the `k` nearest
/// neighbours of `i` or vice versa. Distance ties go to the lower index.
pub fn knn_edges(points: &[Vec<f64>], k: usize) -> Result<Vec<(usize, usize)>> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(GigError::Argument(format!("k must lie in [1, {}), got {k}", n)));
    }
    let d = points[0].len();
    for p in points {
        check_dim(d, p.len())?;
    }
    let neighbours: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(&points[i], &points[j]), j))
                .collect();
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k - 1, by_dist);
            cand.truncate(k);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    let mut edges: Vec<(usize, usize)> = neighbours
        .iter()
        .enumerate()
        .flat_map(|(i, nb)| nb.iter().map(move |&j| (i.min(j), i.max(j))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Weighted undirected graph whose nodes are points in input space.
#[derive(Clone, Debug)]
pub struct GeodesicGraph {
    nodes: Vec<Vec<f64>>,
    k: usize,
    edges: Vec<Edge>,
    /// Edge indices incident to each node.
    adjacency: Vec<Vec<usize>>,
    component_id: Vec<usize>,
    num_components: usize,
}

impl GeodesicGraph {
    /// kNN graph with every edge weighted by `metric` (computed in parallel).
    pub fn build(points: Vec<Vec<f64>>, k: usize, metric: &dyn EdgeMetric) -> Result<Self> {
        let pairs = knn_edges(&points, k)?;
        let weights = pairs
            .par_iter()
            .map(|&(i, j)| metric.weight(&points[i], &points[j]))
            .collect::<Result<Vec<f64>>>()?;
        let edges = pairs
            .into_iter()
            .zip(weights)
            .map(|((i, j), weight)| Edge {
                i,
                j,
                weight,
                is_bridge: false,
            })
            .collect();
        Self::from_edges(points, edges, k)
    }

    /// Graph over `nodes` with explicit edges.
    pub fn from_edges(nodes: Vec<Vec<f64>>, edges: Vec<Edge>, k: usize) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(GigError::Argument("graph needs at least one node".into()));
        }
        let d = nodes[0].len();
        for p in &nodes {
            check_dim(d, p.len())?;
        }
        let mut adjacency = vec![Vec::new(); n];
        for (e, edge) in edges.iter().enumerate() {
            if edge.i >= n || edge.j >= n || edge.i == edge.j {
                return Err(GigError::Argument(format!("invalid edge ({}, {})", edge.i, edge.j)));
            }
            if !(edge.weight >= 0.0 && edge.weight.is_finite()) {
                return Err(GigError::Argument(format!(
                    "edge ({}, {}) has invalid weight {}",
                    edge.i, edge.j, edge.weight
                )));
            }
            adjacency[edge.i].push(e);
            adjacency[edge.j].push(e);
        }
        let mut graph = Self {
            nodes,
            k,
            edges,
            adjacency,
            component_id: Vec::new(),
            num_components: 0,
        };
        graph.label_components();
        Ok(graph)
    }

    fn label_components(&mut self) {
        let n = self.nodes.len();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &e in &self.adjacency[u] {
                    let v = self.other(e, u);
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        self.component_id = comp;
        self.num_components = next;
    }

    fn other(&self, e: usize, u: usize) -> usize {
        let edge = &self.edges[e];
        if edge.i == u {
            edge.j
        } else {
            edge.i
        }
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn bridges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.is_bridge)
    }

    pub fn component_id(&self) -> &[usize] {
        &self.component_id
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    /// Neighbours of `u` with edge weights.
    pub fn neighbours(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency[u].iter().map(move |&e| (self.other(e, u), self.edges[e].weight))
    }

    /// Weight of edge `{u, v}` if present (the lightest, should several exist).
    pub fn edge_weight(&self, u: usize, v: usize) -> Option<f64> {
        self.neighbours(u)
            .filter(|&(w, _)| w == v)
            .map(|(_, wt)| wt)
            .min_by(f64::total_cmp)
    }

    /// Joins components until the graph is connected.
    ///
    /// Each step links the two components at minimum Euclidean distance with a
    /// single edge between their closest pair of points, weighted by `metric`.
    /// Returns the number of bridges added.
    pub fn connect_components(&mut self, metric: &dyn EdgeMetric) -> Result<usize> {
        if self.num_components <= 1 {
            return Ok(0);
        }
        // Closest cross pair for every pair of components. Merging the globally
        // closest pair of components repeatedly is Kruskal on these candidates.
        let n = self.nodes.len();
        let best: HashMap<(usize, usize), (f64, usize, usize)> = (0..n)
            .into_par_iter()
            .fold(HashMap::new, |mut acc, i| {
                let ci = self.component_id[i];
                for j in i + 1..n {
                    let cj = self.component_id[j];
                    if ci == cj {
                        continue;
                    }
                    let cand = (squared_distance(&self.nodes[i], &self.nodes[j]), i, j);
                    let key = (ci.min(cj), ci.max(cj));
                    acc.entry(key)
                        .and_modify(|cur| {
                            if cmp_candidate(&cand, cur) == Ordering::Less {
                                *cur = cand;
                            }
                        })
                        .or_insert(cand);
                }
                acc
            })
            .reduce(HashMap::new, |mut a, b| {
                for (key, cand) in b {
                    a.entry(key)
                        .and_modify(|cur| {
                            if cmp_candidate(&cand, cur) == Ordering::Less {
                                *cur = cand;
                            }
                        })
                        .or_insert(cand);
                }
                a
            });
        let mut candidates: Vec<((usize, usize), (f64, usize, usize))> = best.into_iter().collect();
        candidates.sort_by(|a, b| cmp_candidate(&a.1, &b.1));

        let mut sets = DisjointSets::new(self.num_components);
        let mut added = 0;
        for ((ca, cb), (_, i, j)) in candidates {
            if !sets.union(ca, cb) {
                continue;
            }
            let weight = metric.weight(&self.nodes[i], &self.nodes[j])?;
            if !(weight >= 0.0 && weight.is_finite()) {
                return Err(GigError::Argument(format!("bridge ({i}, {j}) has invalid weight {weight}")));
            }
            let e = self.edges.len();
            self.edges.push(Edge {
                i,
                j,
                weight,
                is_bridge: true,
            });
            self.adjacency[i].push(e);
            self.adjacency[j].push(e);
            added += 1;
            if added + 1 == self.num_components {
                break;
            }
        }
        self.label_components();
        Ok(added)
    }

    fn check_connected(&self, source: usize, sink: usize) -> Result<()> {
        let n = self.nodes.len();
        if source >= n || sink >= n {
            return Err(GigError::Argument(format!(
                "node index out of range: {source} -> {sink} in a graph of {n} nodes"
            )));
        }
        if self.component_id[source] != self.component_id[sink] {
            return Err(GigError::Disconnected {
                source_node: source,
                sink,
            });
        }
        Ok(())
    }

    /// Minimum-weight path from `source` to `sink`.
    pub fn shortest_path(&self, source: usize, sink: usize, algorithm: Algorithm) -> Result<ShortestPathResult> {
        self.check_connected(source, sink)?;
        let pred = match algorithm {
            Algorithm::Dijkstra => self.shortest_path_tree(source).pred,
            Algorithm::AStar => self.astar(source, sink),
        };
        let nodes = walk_back(&pred, source, sink).ok_or(GigError::Disconnected {
            source_node: source,
            sink,
        })?;
        Ok(ShortestPathResult {
            total_weight: self.path_weight(&nodes),
            nodes,
        })
    }

    /// Sum of edge weights along `nodes`, accumulated from the first node.
    pub fn path_weight(&self, nodes: &[usize]) -> f64 {
        nodes
            .windows(2)
            .map(|w| self.edge_weight(w[0], w[1]).unwrap_or(f64::INFINITY))
            .fold(0.0, |acc, w| acc + w)
    }

    /// Single-source Dijkstra. Among equal-cost predecessors the lowest index wins.
    pub fn shortest_path_tree(&self, source: usize) -> ShortestPathTree {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![usize::MAX; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(QueueEntry { key: 0.0, node: source });
        while let Some(QueueEntry { key, node: u }) = heap.pop() {
            if settled[u] || key > dist[u] {
                continue;
            }
            settled[u] = true;
            for (v, w) in self.neighbours(u) {
                if settled[v] {
                    continue;
                }
                let cand = dist[u] + w;
                if cand < dist[v] || (cand == dist[v] && u < pred[v]) {
                    if cand < dist[v] {
                        dist[v] = cand;
                        heap.push(QueueEntry { key: cand, node: v });
                    }
                    pred[v] = u;
                }
            }
        }
        ShortestPathTree { source, dist, pred }
    }

    /// A* with heuristic `alpha * ||v - sink||`, where `alpha` is the smallest
    /// weight-to-length ratio over all edges (slightly shrunk so rounding cannot
    /// make it overestimate). This keeps the heuristic admissible for any weights.
    fn astar(&self, source: usize, sink: usize) -> Vec<usize> {
        let n = self.nodes.len();
        let alpha = self
            .edges
            .iter()
            .filter_map(|e| {
                let len = distance(&self.nodes[e.i], &self.nodes[e.j]);
                (len > 0.0).then(|| e.weight / len)
            })
            .min_by(f64::total_cmp)
            .unwrap_or(0.0)
            * (1.0 - 1e-9);
        let h = |v: usize| alpha * distance(&self.nodes[v], &self.nodes[sink]);
        let mut g = vec![f64::INFINITY; n];
        let mut pred = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        g[source] = 0.0;
        heap.push(QueueEntry { key: h(source), node: source });
        while let Some(QueueEntry { key, node: u }) = heap.pop() {
            if key > g[u] + h(u) {
                continue;
            }
            if u == sink {
                break;
            }
            for (v, w) in self.neighbours(u) {
                let cand = g[u] + w;
                if cand < g[v] {
                    g[v] = cand;
                    pred[v] = u;
                    heap.push(QueueEntry { key: cand + h(v), node: v });
                }
            }
        }
        pred
    }

    /// Writes `i,j,weight,is_bridge` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "weight", "is_bridge"])?;
        for e in &self.edges {
            w.write_record([
                e.i.to_string(),
                e.j.to_string(),
                e.weight.to_string(),
                e.is_bridge.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn cmp_candidate(a: &(f64, usize, usize), b: &(f64, usize, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

fn walk_back(pred: &[usize], source: usize, sink: usize) -> Option<Vec<usize>> {
    let mut nodes = vec![sink];
    let mut cur = sink;
    while cur != source {
        cur = pred[cur];
        if cur == usize::MAX || nodes.len() > pred.len() {
            return None;
        }
        nodes.push(cur);
    }
    nodes.reverse();
    Some(nodes)
}

/// Distances and predecessors from one source.
#[derive(Clone, Debug)]
pub struct ShortestPathTree {
    source: usize,
    dist: Vec<f64>,
    pred: Vec<usize>,
}

impl ShortestPathTree {
    pub fn source(&self) -> usize {
        self.source
    }

    pub fn distance(&self, node: usize) -> f64 {
        self.dist[node]
    }

    /// Node sequence from the source to `sink`, or `None` if unreachable.
    pub fn path_to(&self, sink: usize) -> Option<Vec<usize>> {
        walk_back(&self.pred, self.source, sink)
    }
}

#[derive(Clone, Copy, Debug)]
struct QueueEntry {
    key: f64,
    node: usize,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // Reversed: BinaryHeap is a max-heap, we pop the smallest key, then the lowest index.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then(other.node.cmp(&self.node))
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
