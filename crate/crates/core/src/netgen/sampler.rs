use rand::Rng;

use super::Group;
use crate::rng::StreamRng;

/// Binary indexed tree over non-negative integer weights.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<u64>,
    total: u64,
}

impl Fenwick {
    fn new(len: usize) -> Self {
        Fenwick {
            tree: vec![0; len + 1],
            total: 0,
        }
    }

    fn add(&mut self, index: usize, delta: i64) {
        self.total = (self.total as i64 + delta) as u64;
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i64 + delta) as u64;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: u64) -> usize {
        debug_assert!(target < self.total);
        let mut pos = 0;
        let mut step = (self.tree.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }
}

fn affinity(homophily: f64, candidate: Group, arriving: Group) -> f64 {
    if candidate == arriving {
        homophily
    } else {
        1.0 - homophily
    }
}

/// Unnormalized attachment weights `h_ij * k_i` for candidates given as
/// `(group, degree)` pairs.
pub fn attachment_weights(homophily: f64, arriving: Group, candidates: &[(Group, u64)]) -> Vec<f64> {
    candidates
        .iter()
        .map(|&(g, k)| affinity(homophily, g, arriving) * k as f64)
        .collect()
}

/// One target chosen by [`AttachmentSampler::draw_targets`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Draw {
    pub target: usize,
    /// Every remaining candidate had zero weight, so the target was drawn
    /// uniformly instead.
    pub fallback: bool,
}

/// Incremental state of the homophilic preferential-attachment process.
///
/// Candidates are the nodes added so far. The weight of candidate `i` for an
/// arriving node `j` is `h_ij * k_i`, with `h_ij = h` inside a group and
/// `1 - h` across groups. Sampling is exact: a group is chosen with
/// probability proportional to its total weight, then a node inside the group
/// proportional to its integer degree, via one Fenwick tree per group.
#[derive(Debug, Clone)]
pub struct AttachmentSampler {
    homophily: f64,
    labels: Vec<Group>,
    degree: Vec<u64>,
    trees: [Fenwick; 2],
    present: usize,
}

impl AttachmentSampler {
    /// `labels` fixes the group of every node that will ever be added, in
    /// arrival order.
    pub fn new(homophily: f64, labels: Vec<Group>) -> Self {
        let n = labels.len();
        AttachmentSampler {
            homophily,
            labels,
            degree: vec![0; n],
            trees: [Fenwick::new(n), Fenwick::new(n)],
            present: 0,
        }
    }

    /// Number of nodes added so far.
    pub fn len(&self) -> usize {
        self.present
    }

    pub fn is_empty(&self) -> bool {
        self.present == 0
    }

    pub fn degree(&self, node: usize) -> u64 {
        self.degree[node]
    }

    /// Adds the next node in arrival order (with degree zero) and returns its id.
    pub fn add_node(&mut self) -> usize {
        assert!(self.present < self.labels.len(), "all nodes already added");
        self.present += 1;
        self.present - 1
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        for node in [u, v] {
            assert!(node < self.present, "edge endpoint {node} not added yet");
            self.degree[node] += 1;
            self.trees[self.labels[node].index()].add(node, 1);
        }
    }

    /// Homophily factor `h_ij` between a candidate group and the arriving group.
    pub fn affinity(&self, candidate: Group, arriving: Group) -> f64 {
        affinity(self.homophily, candidate, arriving)
    }

    /// Attachment probabilities `Pi_ij` of every present node for an arrival of
    /// group `arriving`, or `None` when every weight is zero.
    pub fn probabilities(&self, arriving: Group) -> Option<Vec<f64>> {
        let candidates: Vec<(Group, u64)> = (0..self.present)
            .map(|i| (self.labels[i], self.degree[i]))
            .collect();
        let weights = attachment_weights(self.homophily, arriving, &candidates);
        let total: f64 = weights.iter().sum();
        (total > 0.0).then(|| weights.iter().map(|w| w / total).collect())
    }

    /// Selects `m` distinct targets among the present nodes for an arrival of
    /// group `arriving`, sampling without replacement and renormalizing after
    /// each pick.
    pub fn draw_targets(&mut self, arriving: Group, m: usize, rng: &mut StreamRng) -> Vec<Draw> {
        assert!(m <= self.present, "cannot draw {m} distinct targets from {}", self.present);
        let mut draws: Vec<Draw> = Vec::with_capacity(m);
        for _ in 0..m {
            let masses = [Group::A, Group::B]
                .map(|g| self.affinity(g, arriving) * self.trees[g.index()].total as f64);
            let sum = masses[0] + masses[1];
            let draw = if sum > 0.0 {
                let u = rng.random::<f64>() * sum;
                let group = if masses[0] > 0.0 && (u < masses[0] || masses[1] == 0.0) {
                    Group::A
                } else {
                    Group::B
                };
                let tree = &self.trees[group.index()];
                let target = tree.find(rng.random_range(0..tree.total));
                Draw {
                    target,
                    fallback: false,
                }
            } else {
                let target = loop {
                    let candidate = rng.random_range(0..self.present);
                    if draws.iter().all(|d| d.target != candidate) {
                        break candidate;
                    }
                };
                Draw {
                    target,
                    fallback: true,
                }
            };
            let t = draw.target;
            self.trees[self.labels[t].index()].add(t, -(self.degree[t] as i64));
            draws.push(draw);
        }
        for d in &draws {
            let t = d.target;
            self.trees[self.labels[t].index()].add(t, self.degree[t] as i64);
        }
        draws
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn fenwick_find_matches_linear_scan() {
        let weights = [3u64, 0, 1, 4, 0, 2];
        let mut f = Fenwick::new(weights.len());
        for (i, &w) in weights.iter().enumerate() {
            f.add(i, w as i64);
        }
        let mut expected = Vec::new();
        for (i, &w) in weights.iter().enumerate() {
            expected.extend(std::iter::repeat_n(i, w as usize));
        }
        let found: Vec<usize> = (0..f.total).map(|t| f.find(t)).collect();
        assert_eq!(found, expected);
    }

    #[test]
    fn hand_computed_probabilities() {
        // degrees [3, 1]; node 0 shares the arrival's group, node 1 does not.
        let w = attachment_weights(0.75, Group::A, &[(Group::A, 3), (Group::B, 1)]);
        assert_eq!(w, vec![2.25, 0.25]);
        let total: f64 = w.iter().sum();
        assert!((w[0] / total - 0.9).abs() < 1e-12);
        assert!((w[1] / total - 0.1).abs() < 1e-12);
    }

    #[test]
    fn draws_are_distinct() {
        let labels: Vec<Group> = (0..10)
            .map(|i| if i % 3 == 0 { Group::A } else { Group::B })
            .collect();
        let mut s = AttachmentSampler::new(0.3, labels);
        for _ in 0..5 {
            s.add_node();
        }
        for i in 1..5 {
            s.add_edge(i - 1, i);
        }
        let mut rng = stream(1, &[]);
        for _ in 0..200 {
            let d = s.draw_targets(Group::A, 4, &mut rng);
            let mut t: Vec<usize> = d.iter().map(|d| d.target).collect();
            t.sort();
            t.dedup();
            assert_eq!(t.len(), 4);
        }
        // degrees restored after each draw
        assert_eq!(s.trees[0].total + s.trees[1].total, 8);
    }

    #[test]
    fn zero_weights_fall_back_to_uniform() {
        // h = 1 and no same-group candidate exists
        let mut s = AttachmentSampler::new(1.0, vec![Group::B, Group::B, Group::A]);
        s.add_node();
        s.add_node();
        s.add_edge(0, 1);
        let mut rng = stream(3, &[]);
        let d = s.draw_targets(Group::A, 2, &mut rng);
        assert!(d.iter().all(|d| d.fallback));
        assert!(s.probabilities(Group::A).is_none());
    }
}
