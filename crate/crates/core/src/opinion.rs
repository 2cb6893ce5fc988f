//! Opinions on a 7-point Likert scale and population states over time.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgen::{AttributedGraph, Group};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OpinionError {
    #[error("opinion level {0} is outside 0..=6")]
    OutOfRange(i64),
    #[error("statement text is empty")]
    EmptyStatement,
    #[error("node {0} has no neighbors")]
    EmptyNeighborhood(usize),
    #[error("state {index} covers {found} nodes, expected {expected}")]
    InconsistentStates {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("no states given")]
    NoStates,
    #[error("malformed trajectory CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// A level on the 0 (strongly disagree) ..= 6 (strongly agree) scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct Opinion(u8);

impl Opinion {
    pub const LEVELS: usize = 7;
    pub const MIN: Opinion = Opinion(0);
    pub const NEUTRAL: Opinion = Opinion(3);
    pub const MAX: Opinion = Opinion(6);

    pub fn new(level: i64) -> Result<Self, OpinionError> {
        if (0..=6).contains(&level) {
            Ok(Opinion(level as u8))
        } else {
            Err(OpinionError::OutOfRange(level))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Opinion> {
        (0..7).map(Opinion)
    }

    /// Label used in prompts and legends.
    pub fn phrase(self) -> &'static str {
        [
            "strongly disagree",
            "disagree",
            "mildly disagree",
            "neutral",
            "mildly agree",
            "agree",
            "strongly agree",
        ][self.0 as usize]
    }

    /// Absolute distance in levels.
    pub fn distance(self, other: Opinion) -> u8 {
        self.0.abs_diff(other.0)
    }
}

impl TryFrom<i64> for Opinion {
    type Error = OpinionError;
    fn try_from(level: i64) -> Result<Self, Self::Error> {
        Opinion::new(level)
    }
}

impl From<Opinion> for u8 {
    fn from(o: Opinion) -> u8 {
        o.0
    }
}

impl fmt::Display for Opinion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The proposition under debate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Statement(String);

impl Statement {
    pub fn new(text: impl Into<String>) -> Result<Self, OpinionError> {
        let text = text.into();
        if text.trim().is_empty() {
            Err(OpinionError::EmptyStatement)
        } else {
            Ok(Statement(text))
        }
    }

    pub fn text(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Statement {
    type Error = OpinionError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Statement::new(s)
    }
}

impl From<Statement> for String {
    fn from(s: Statement) -> String {
        s.0
    }
}

/// Opinions of every node at iteration `t`, indexed by node id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionState {
    pub t: usize,
    pub opinions: Vec<Opinion>,
}

impl OpinionState {
    pub fn new(t: usize, opinions: Vec<Opinion>) -> Self {
        OpinionState { t, opinions }
    }

    pub fn len(&self) -> usize {
        self.opinions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opinions.is_empty()
    }

    pub fn get(&self, node: usize) -> Opinion {
        self.opinions[node]
    }

    pub fn histogram(&self) -> Histogram {
        Histogram::from_opinions(self.opinions.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Majority starts at strong agreement, minority at strong disagreement.
    Base,
    /// Majority starts at strong disagreement, minority at strong agreement.
    Reverse,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Base => "base",
            Direction::Reverse => "reverse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub direction: Direction,
    /// Discussants see the opinion distribution of their neighbors.
    pub awareness: bool,
}

impl ScenarioSpec {
    pub fn base() -> Self {
        ScenarioSpec {
            direction: Direction::Base,
            awareness: false,
        }
    }

    pub fn reverse() -> Self {
        ScenarioSpec {
            direction: Direction::Reverse,
            awareness: false,
        }
    }

    pub fn with_awareness(mut self, awareness: bool) -> Self {
        self.awareness = awareness;
        self
    }
}

/// Starting levels of the two groups in the base direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialLevels {
    pub majority: Opinion,
    pub minority: Opinion,
}

impl Default for InitialLevels {
    fn default() -> Self {
        InitialLevels {
            majority: Opinion::MAX,
            minority: Opinion::MIN,
        }
    }
}

/// Opinions at `t = 0`: majority (`B`) nodes at 6 and minority (`A`) nodes at
/// 0 in the base direction, swapped in reverse.
pub fn initialize_opinions(g: &AttributedGraph, spec: &ScenarioSpec) -> OpinionState {
    initialize_opinions_with(g, spec, InitialLevels::default())
}

pub fn initialize_opinions_with(g: &AttributedGraph, spec: &ScenarioSpec, levels: InitialLevels) -> OpinionState {
    let (majority, minority) = match spec.direction {
        Direction::Base => (levels.majority, levels.minority),
        Direction::Reverse => (levels.minority, levels.majority),
    };
    let opinions = g
        .labels()
        .iter()
        .map(|&l| match l {
            Group::A => minority,
            Group::B => majority,
        })
        .collect();
    OpinionState::new(0, opinions)
}

/// Counts of opinions per level. Fractions are derived on demand so the
/// exact counts are what gets compared and stored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: [u32; 7],
}

impl Histogram {
    pub fn from_opinions(opinions: impl IntoIterator<Item = Opinion>) -> Self {
        let mut counts = [0u32; 7];
        for o in opinions {
            counts[o.level() as usize] += 1;
        }
        Histogram { counts }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn count(&self, level: Opinion) -> u32 {
        self.counts[level.level() as usize]
    }

    /// Fraction per level; all zero for an empty histogram.
    pub fn fractions(&self) -> [f64; 7] {
        let total = self.total();
        if total == 0 {
            return [0.0; 7];
        }
        self.counts.map(|c| c as f64 / total as f64)
    }

    /// Integer percentages summing to 100, by largest remainder with ties
    /// going to the lower level.
    pub fn percentages(&self) -> [u32; 7] {
        let total = self.total() as u64;
        if total == 0 {
            return [0; 7];
        }
        let mut out = [0u32; 7];
        let mut remainders = Vec::with_capacity(7);
        for (i, &c) in self.counts.iter().enumerate() {
            let scaled = c as u64 * 100;
            out[i] = (scaled / total) as u32;
            remainders.push((scaled % total, i));
        }
        let short = 100 - out.iter().sum::<u32>();
        remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in remainders.iter().take(short as usize) {
            out[i] += 1;
        }
        out
    }
}

/// Opinion histogram over the neighbors of `node`, excluding the node itself.
pub fn neighborhood_distribution(
    g: &AttributedGraph,
    state: &OpinionState,
    node: usize,
) -> Result<Histogram, OpinionError> {
    let neighbors = g.neighbors(node);
    if neighbors.is_empty() {
        return Err(OpinionError::EmptyNeighborhood(node));
    }
    Ok(Histogram::from_opinions(neighbors.iter().map(|&j| state.get(j))))
}

/// Per-iteration fraction of agents at each level.
pub fn trajectory_proportions(states: &[OpinionState]) -> Result<Vec<[f64; 7]>, OpinionError> {
    let first = states.first().ok_or(OpinionError::NoStates)?;
    states
        .iter()
        .enumerate()
        .map(|(index, s)| {
            if s.len() != first.len() {
                return Err(OpinionError::InconsistentStates {
                    index,
                    found: s.len(),
                    expected: first.len(),
                });
            }
            Ok(s.histogram().fractions())
        })
        .collect()
}

pub const TRAJECTORY_HEADER: &str = "t,level_0,level_1,level_2,level_3,level_4,level_5,level_6";

/// Trajectory CSV: one row per state with the iteration index and seven
/// fractions.
pub fn trajectory_csv(states: &[OpinionState]) -> Result<String, OpinionError> {
    let rows = trajectory_proportions(states)?;
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for (s, row) in states.iter().zip(rows) {
        write!(out, "{}", s.t).unwrap();
        for f in row {
            write!(out, ",{f}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a trajectory CSV back into `(t, fractions)` rows.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<(usize, [f64; 7])>, OpinionError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRAJECTORY_HEADER => {}
        _ => {
            return Err(OpinionError::Csv {
                line: 1,
                reason: "missing header".into(),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let err = |reason: String| OpinionError::Csv { line: i + 1, reason };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(err(format!("expected 8 fields, found {}", fields.len())));
            }
            let t = fields[0].parse().map_err(|_| err(format!("bad t `{}`", fields[0])))?;
            let mut row = [0.0; 7];
            for (slot, f) in row.iter_mut().zip(&fields[1..]) {
                *slot = f.parse().map_err(|_| err(format!("bad fraction `{f}`")))?;
            }
            Ok((t, row))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{generate_network, NetworkConfig};
    use proptest::prelude::*;

    fn ops(levels: &[i64]) -> Vec<Opinion> {
        levels.iter().map(|&l| Opinion::new(l).unwrap()).collect()
    }

    #[test]
    fn out_of_range_is_an_error() {
        assert_eq!(Opinion::new(7), Err(OpinionError::OutOfRange(7)));
        assert_eq!(Opinion::new(-1), Err(OpinionError::OutOfRange(-1)));
        assert!(serde_json::from_str::<Opinion>("9").is_err());
        assert_eq!(serde_json::from_str::<Opinion>("4").unwrap(), Opinion(4));
        assert!(Statement::new("  ").is_err());
    }

    #[test]
    fn initialization_follows_direction() {
        let g = generate_network(&NetworkConfig::new(100, 0.3, 0.5, 2)).unwrap();
        let base = initialize_opinions(&g, &ScenarioSpec::base()).histogram();
        assert_eq!(base.count(Opinion::MAX), 70);
        assert_eq!(base.count(Opinion::MIN), 30);
        let rev = initialize_opinions(&g, &ScenarioSpec::reverse()).histogram();
        assert_eq!(rev.count(Opinion::MIN), 70);
        assert_eq!(rev.count(Opinion::MAX), 30);

        let g = generate_network(&NetworkConfig::new(100, 0.5, 0.5, 2)).unwrap();
        let s = initialize_opinions(&g, &ScenarioSpec::base());
        assert_eq!(s.t, 0);
        assert_eq!(s.histogram().count(Opinion::MAX), 50);
        for i in 0..100 {
            let want = if g.label(i) == Group::B { Opinion::MAX } else { Opinion::MIN };
            assert_eq!(s.get(i), want);
        }
    }

    #[test]
    fn neighborhood_histograms() {
        let cfg = NetworkConfig::new(5, 0.0, 0.5, 0);
        let g = AttributedGraph::from_parts(cfg, vec![Group::B; 5], [(0, 1), (0, 2), (0, 3), (0, 4)], [])
            .unwrap();
        let state = OpinionState::new(0, ops(&[3, 0, 0, 6, 6]));
        let h = neighborhood_distribution(&g, &state, 0).unwrap();
        assert_eq!(h.fractions(), [0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        let h = neighborhood_distribution(&g, &state, 3).unwrap();
        assert_eq!(h.fractions(), [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);

        let lonely = AttributedGraph::from_parts(cfg, vec![Group::B; 5], [(0, 1)], []).unwrap();
        assert_eq!(
            neighborhood_distribution(&lonely, &state, 4),
            Err(OpinionError::EmptyNeighborhood(4))
        );
    }

    #[test]
    fn heterophilic_minority_sees_only_the_majority() {
        for seed in 0..5 {
            let g = generate_network(&NetworkConfig::new(100, 0.1, 0.0, seed)).unwrap();
            let s = initialize_opinions(&g, &ScenarioSpec::base());
            for i in (0..100).filter(|&i| g.label(i) == Group::A) {
                // intra-minority edges can only come from the seed path or fallback
                let exempt = g.neighbors(i).iter().any(|&j| {
                    let e = (i.min(j), i.max(j));
                    g.is_seed_edge(e) || g.fallback_edges().contains(&e)
                });
                if !exempt {
                    let h = neighborhood_distribution(&g, &s, i).unwrap();
                    assert_eq!(h.fractions()[6], 1.0);
                }
            }
        }
    }

    #[test]
    fn trajectory_rows() {
        let s = OpinionState::new(0, ops(&[3, 3, 3]));
        assert_eq!(trajectory_proportions(&[s]).unwrap(), vec![[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]]);
        let a = OpinionState::new(0, ops(&[0, 6]));
        let b = OpinionState::new(1, ops(&[0]));
        assert_eq!(
            trajectory_proportions(&[a, b]),
            Err(OpinionError::InconsistentStates {
                index: 1,
                found: 1,
                expected: 2
            })
        );
        assert_eq!(trajectory_proportions(&[]), Err(OpinionError::NoStates));
    }

    #[test]
    fn initial_base_proportions() {
        let g = generate_network(&NetworkConfig::new(100, 0.3, 0.25, 8)).unwrap();
        let rows = trajectory_proportions(&[initialize_opinions(&g, &ScenarioSpec::base())]).unwrap();
        assert_eq!(rows[0], [0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7]);
    }

    #[test]
    fn percentages_sum_to_100() {
        let h = Histogram { counts: [1, 1, 1, 0, 0, 0, 0] };
        assert_eq!(h.percentages(), [34, 33, 33, 0, 0, 0, 0]);
        let h = Histogram { counts: [0, 0, 0, 0, 1, 0, 3] };
        assert_eq!(h.percentages(), [0, 0, 0, 0, 25, 0, 75]);
    }

    proptest! {
        #[test]
        fn fractions_sum_to_one(levels in prop::collection::vec(0i64..7, 1..60)) {
            let s = OpinionState::new(0, ops(&levels));
            let rows = trajectory_proportions(std::slice::from_ref(&s)).unwrap();
            prop_assert!((rows[0].iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert_eq!(s.histogram().percentages().iter().sum::<u32>(), 100);
        }

        #[test]
        fn csv_round_trip(runs in prop::collection::vec(prop::collection::vec(0i64..7, 5), 1..6)) {
            let states: Vec<OpinionState> = runs.iter().enumerate()
                .map(|(t, l)| OpinionState::new(t, ops(l))).collect();
            let csv = trajectory_csv(&states).unwrap();
            let back = parse_trajectory_csv(&csv).unwrap();
            let rows = trajectory_proportions(&states).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for ((t, r), (s, want)) in back.iter().zip(states.iter().zip(rows)) {
                prop_assert_eq!(*t, s.t);
                prop_assert_eq!(*r, want);
            }
        }
    }
}
