//! Homophilic preferential-attachment networks.
//!
//! Nodes belong to one of two groups: `A`, the minority, and `B`, the
//! majority. The generator grows a scale-free graph from a small path-shaped
//! seed. Each arriving node picks `m` distinct existing targets with
//! probability proportional to `h_ij * k_i`, where `k_i` is the target's
//! degree and `h_ij` is `h` for same-group pairs and `1 - h` otherwise.
//! `h = 0.5` reduces to plain Barabási–Albert attachment.

mod exponent;
mod io;
mod sampler;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, StreamRng};

pub use exponent::{degree_exponent, fit_power_law, hurwitz_zeta};
pub use io::{read_graph, write_graph, GraphSidecar};
pub use sampler::{attachment_weights, AttachmentSampler, Draw};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("node count {n} is below the seed-graph size {seed_size}")]
    TooFewNodes { n: usize, seed_size: usize },
    #[error("links per arriving node must be at least 1")]
    NoLinks,
    #[error("minority fraction {0} is outside [0, 0.5]")]
    MinorityFraction(f64),
    #[error("homophily {0} is outside [0, 1]")]
    Homophily(f64),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("degree sequence cannot be fitted: {0}")]
    NonFittable(String),
    #[error("malformed graph file at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Group membership of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Minority.
    A,
    /// Majority.
    B,
}

impl Group {
    pub(crate) fn index(self) -> usize {
        match self {
            Group::A => 0,
            Group::B => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::A => "A",
            Group::B => "B",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of nodes.
    pub n: usize,
    /// Links formed by each arriving node.
    pub m: usize,
    /// Fraction of nodes in the minority group, in `[0, 0.5]`.
    pub minority_fraction: f64,
    /// Same-group attachment preference, in `[0, 1]`.
    pub homophily: f64,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(n: usize, minority_fraction: f64, homophily: f64, seed: u64) -> Self {
        NetworkConfig {
            n,
            m: 2,
            minority_fraction,
            homophily,
            seed,
        }
    }

    pub fn with_links(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    /// Size `m0` of the initial path: `max(m + 1, 3)`.
    pub fn seed_size(&self) -> usize {
        (self.m + 1).max(3)
    }

    pub fn minority_count(&self) -> usize {
        (self.minority_fraction * self.n as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.m == 0 {
            return Err(NetworkError::NoLinks);
        }
        if !(0.0..=0.5).contains(&self.minority_fraction) {
            return Err(NetworkError::MinorityFraction(self.minority_fraction));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return Err(NetworkError::Homophily(self.homophily));
        }
        if self.n < self.seed_size() {
            return Err(NetworkError::TooFewNodes {
                n: self.n,
                seed_size: self.seed_size(),
            });
        }
        Ok(())
    }
}

/// Undirected edge stored as `(u, v)` with `u < v`.
pub type Edge = (usize, usize);

fn normalize(u: usize, v: usize) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// A simple undirected graph whose nodes carry a [`Group`] label.
///
/// Node ids are arrival order: ids `0..seed_size` form the seed path and
/// every later node attached to strictly smaller ids.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    config: NetworkConfig,
    labels: Vec<Group>,
    edges: Vec<Edge>,
    fallback_edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl AttributedGraph {
    /// Assembles a graph from explicit parts, checking structural invariants:
    /// endpoints in range, no self-loops, no duplicate edges, and the
    /// minority count implied by `config`.
    pub fn from_parts(
        config: NetworkConfig,
        labels: Vec<Group>,
        edges: impl IntoIterator<Item = Edge>,
        fallback_edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, NetworkError> {
        let n = labels.len();
        if n != config.n {
            return Err(NetworkError::InvalidGraph(format!(
                "{n} labels for a {}-node config",
                config.n
            )));
        }
        let minority = labels.iter().filter(|&&g| g == Group::A).count();
        if minority != config.minority_count() {
            return Err(NetworkError::InvalidGraph(format!(
                "{minority} minority nodes, expected {}",
                config.minority_count()
            )));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(NetworkError::InvalidGraph(format!("self-loop at {u}")));
            }
            if u >= n || v >= n {
                return Err(NetworkError::InvalidGraph(format!("edge {u}-{v} out of range")));
            }
            if !set.insert(normalize(u, v)) {
                return Err(NetworkError::InvalidGraph(format!("duplicate edge {u}-{v}")));
            }
        }
        let fallback: BTreeSet<Edge> = fallback_edges
            .into_iter()
            .map(|(u, v)| normalize(u, v))
            .collect();
        if let Some(e) = fallback.iter().find(|e| !set.contains(e)) {
            return Err(NetworkError::InvalidGraph(format!(
                "fallback edge {}-{} not in edge set",
                e.0, e.1
            )));
        }
        let edges: Vec<Edge> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(AttributedGraph {
            config,
            labels,
            edges,
            fallback_edges: fallback.into_iter().collect(),
            adjacency,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Group] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> Group {
        self.labels[node]
    }

    /// Edges in ascending `(u, v)` order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges placed by the zero-weight fallback rule.
    pub fn fallback_edges(&self) -> &[Edge] {
        &self.fallback_edges
    }

    pub fn fallback_edge_count(&self) -> usize {
        self.fallback_edges.len()
    }

    /// Sorted neighbor ids of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// True when both endpoints belong to the seed path.
    pub fn is_seed_edge(&self, (u, v): Edge) -> bool {
        let m0 = self.config.seed_size();
        u < m0 && v < m0
    }

    pub fn is_cross_group(&self, (u, v): Edge) -> bool {
        self.labels[u] != self.labels[v]
    }
}

/// Label sequence in arrival order: `round(f_a n)` minority labels shuffled
/// uniformly, with a swap that puts both groups into the seed path when both
/// are populated.
fn arrival_labels(config: &NetworkConfig, rng: &mut StreamRng) -> Vec<Group> {
    let n_a = config.minority_count();
    let mut labels: Vec<Group> = (0..config.n)
        .map(|i| if i < n_a { Group::A } else { Group::B })
        .collect();
    labels.shuffle(rng);
    let m0 = config.seed_size();
    if n_a > 0 && n_a < config.n {
        let first = labels[0];
        if labels[..m0].iter().all(|&g| g == first) {
            let k = labels[m0..]
                .iter()
                .position(|&g| g != first)
                .map(|p| p + m0)
                .expect("both groups are populated");
            labels.swap(m0 - 1, k);
        }
    }
    labels
}

/// Grows a homophilic scale-free network. Identical configs give identical
/// graphs.
pub fn generate_network(config: &NetworkConfig) -> Result<AttributedGraph, NetworkError> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, &[rng::tag::NETWORK]);
    let labels = arrival_labels(config, &mut rng);
    let m0 = config.seed_size();
    let mut sampler = AttachmentSampler::new(config.homophily, labels.clone());
    let mut edges = Vec::with_capacity(m0 + config.m * (config.n - m0));
    let mut fallback = Vec::new();
    for i in 0..m0 {
        sampler.add_node();
        if i > 0 {
            sampler.add_edge(i - 1, i);
            edges.push((i - 1, i));
        }
    }
    for (j, &label) in labels.iter().enumerate().skip(m0) {
        let draws = sampler.draw_targets(label, config.m, &mut rng);
        sampler.add_node();
        for d in draws {
            sampler.add_edge(d.target, j);
            edges.push((d.target, j));
            if d.fallback {
                fallback.push((d.target, j));
            }
        }
    }
    AttributedGraph::from_parts(*config, labels, edges, fallback)
}

/// Group-mixing summary of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    /// Cross-group edges over all edges.
    pub cross_fraction: f64,
    /// Cross-group edges over edges with an endpoint outside the seed path.
    pub post_seed_cross_fraction: f64,
    /// `None` when the group is empty.
    pub minority_mean_degree: Option<f64>,
    pub majority_mean_degree: Option<f64>,
    pub fallback_edge_count: usize,
}

pub fn mixing_stats(g: &AttributedGraph) -> MixingReport {
    let fraction = |edges: &mut dyn Iterator<Item = &Edge>| {
        let (cross, total) = edges.fold((0usize, 0usize), |(c, t), &e| {
            (c + usize::from(g.is_cross_group(e)), t + 1)
        });
        if total == 0 {
            0.0
        } else {
            cross as f64 / total as f64
        }
    };
    let mean_degree = |group: Group| {
        let (sum, count) = (0..g.node_count())
            .filter(|&i| g.label(i) == group)
            .fold((0usize, 0usize), |(s, c), i| (s + g.degree(i), c + 1));
        (count > 0).then(|| sum as f64 / count as f64)
    };
    MixingReport {
        cross_fraction: fraction(&mut g.edges().iter()),
        post_seed_cross_fraction: fraction(&mut g.edges().iter().filter(|&&e| !g.is_seed_edge(e))),
        minority_mean_degree: mean_degree(Group::A),
        majority_mean_degree: mean_degree(Group::B),
        fallback_edge_count: g.fallback_edge_count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_configs() {
        assert_eq!(
            NetworkConfig::new(2, 0.3, 0.5, 0).validate(),
            Err(NetworkError::TooFewNodes { n: 2, seed_size: 3 })
        );
        assert_eq!(
            NetworkConfig::new(100, 0.6, 0.5, 0).validate(),
            Err(NetworkError::MinorityFraction(0.6))
        );
        assert_eq!(
            NetworkConfig::new(100, -0.1, 0.5, 0).validate(),
            Err(NetworkError::MinorityFraction(-0.1))
        );
        assert_eq!(
            NetworkConfig::new(100, 0.3, 1.5, 0).validate(),
            Err(NetworkError::Homophily(1.5))
        );
        assert_eq!(
            NetworkConfig::new(100, 0.3, 0.5, 0).with_links(0).validate(),
            Err(NetworkError::NoLinks)
        );
        assert!(generate_network(&NetworkConfig::new(3, 0.3, 0.5, 0).with_links(3)).is_err());
    }

    #[test]
    fn paper_grid_generates() {
        for &f_a in &[0.5, 0.3, 0.1] {
            for &h in &[0.0, 0.25, 0.5, 0.75, 1.0] {
                let cfg = NetworkConfig::new(100, f_a, h, 11);
                let g = generate_network(&cfg).unwrap();
                assert_eq!(g.node_count(), 100);
                assert_eq!(
                    g.labels().iter().filter(|&&l| l == Group::A).count(),
                    (f_a * 100.0).round() as usize
                );
                for i in cfg.seed_size()..100 {
                    assert!(g.degree(i) >= cfg.m);
                }
                assert_eq!(g.edges().len(), 2 + 2 * 97);
            }
        }
    }

    #[test]
    fn seed_path_holds_both_groups() {
        for seed in 0..50 {
            let g = generate_network(&NetworkConfig::new(100, 0.1, 1.0, seed)).unwrap();
            let seed_labels = &g.labels()[..3];
            assert!(seed_labels.contains(&Group::A) && seed_labels.contains(&Group::B));
        }
    }

    #[test]
    fn n_equal_to_seed_size_is_a_path() {
        let g = generate_network(&NetworkConfig::new(3, 0.3, 0.5, 1)).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn boundary_purity() {
        for seed in 0..10 {
            for (h, want_cross) in [(1.0, false), (0.0, true)] {
                let g = generate_network(&NetworkConfig::new(300, 0.3, h, seed)).unwrap();
                let fb: BTreeSet<Edge> = g.fallback_edges().iter().copied().collect();
                for &e in g.edges() {
                    if g.is_seed_edge(e) || fb.contains(&e) {
                        continue;
                    }
                    assert_eq!(g.is_cross_group(e), want_cross, "h={h} edge {e:?}");
                }
            }
        }
    }

    #[test]
    fn mixing_report_counts() {
        let cfg = NetworkConfig::new(4, 0.5, 0.5, 0);
        let g = AttributedGraph::from_parts(
            cfg,
            vec![Group::A, Group::B, Group::A, Group::B],
            [(0, 1), (1, 2), (2, 3), (0, 2)],
            [],
        )
        .unwrap();
        let r = mixing_stats(&g);
        assert_eq!(r.cross_fraction, 0.75);
        // seed size 3: only (2,3) touches a post-seed node
        assert_eq!(r.post_seed_cross_fraction, 1.0);
        assert_eq!(r.minority_mean_degree, Some(2.5));
        assert_eq!(r.majority_mean_degree, Some(1.5));
    }

    #[test]
    fn from_parts_rejects_malformed() {
        let cfg = NetworkConfig::new(3, 0.0, 0.5, 0);
        let labels = vec![Group::B; 3];
        assert!(AttributedGraph::from_parts(cfg, labels.clone(), [(1, 1)], []).is_err());
        assert!(AttributedGraph::from_parts(cfg, labels.clone(), [(0, 1), (1, 0)], []).is_err());
        assert!(AttributedGraph::from_parts(cfg, labels.clone(), [(0, 5)], []).is_err());
        assert!(AttributedGraph::from_parts(cfg, labels.clone(), [(0, 1)], [(1, 2)]).is_err());
        assert!(AttributedGraph::from_parts(cfg, vec![Group::A; 3], [(0, 1)], []).is_err());
    }
}
