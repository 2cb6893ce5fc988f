use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{Macrostate, NeighborhoodConfig};
use crate::opinion::Opinion;

/// The part of an interaction the analysis looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub t: usize,
    pub discussant: Opinion,
    pub opponent: Opinion,
    pub neighborhood: Option<NeighborhoodConfig>,
    pub delta: i8,
    pub moved_toward: bool,
}

impl Observation {
    pub fn new(discussant: Opinion, opponent: Opinion, delta: i8) -> Self {
        let toward = (opponent.level() as i16 - discussant.level() as i16).signum() as i8;
        Observation {
            t: 0,
            discussant,
            opponent,
            neighborhood: None,
            delta,
            moved_toward: delta != 0 && delta == toward,
        }
    }

    pub fn with_neighborhood(mut self, c: NeighborhoodConfig) -> Self {
        self.neighborhood = Some(c);
        self
    }

    pub fn at(mut self, t: usize) -> Self {
        self.t = t;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// `(discussant class, opponent class)`.
    Pair,
    /// `(discussant class, opponent class, neighborhood configuration)`.
    PairNeighborhood,
}

impl Conditioning {
    pub fn as_str(self) -> &'static str {
        match self {
            Conditioning::Pair => "pair",
            Conditioning::PairNeighborhood => "pair_neighborhood",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Low/high macrostates; neutral events are excluded.
    #[default]
    Macro,
    /// All seven levels.
    Level,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub conditioning: Conditioning,
    pub granularity: Granularity,
    /// Only observations with `t` in this range, when set.
    pub window: Option<Range<usize>>,
}

impl MatrixSpec {
    pub fn new(conditioning: Conditioning) -> Self {
        MatrixSpec {
            conditioning,
            granularity: Granularity::Macro,
            window: None,
        }
    }
}

/// A row or column label of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateClass {
    Low,
    High,
    Level(u8),
}

impl StateClass {
    fn of(o: Opinion, granularity: Granularity) -> Option<StateClass> {
        match granularity {
            Granularity::Macro => Macrostate::of(o).map(|m| match m {
                Macrostate::Low => StateClass::Low,
                Macrostate::High => StateClass::High,
            }),
            Granularity::Level => Some(StateClass::Level(o.level())),
        }
    }

    pub fn all(granularity: Granularity) -> Vec<StateClass> {
        match granularity {
            Granularity::Macro => vec![StateClass::Low, StateClass::High],
            Granularity::Level => (0..7).map(StateClass::Level).collect(),
        }
    }

    pub fn parse(s: &str) -> Option<StateClass> {
        match s {
            "low" => Some(StateClass::Low),
            "high" => Some(StateClass::High),
            _ => s.parse::<u8>().ok().filter(|&l| l < 7).map(StateClass::Level),
        }
    }
}

impl fmt::Display for StateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateClass::Low => f.write_str("low"),
            StateClass::High => f.write_str("high"),
            StateClass::Level(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub discussant: StateClass,
    pub opponent: StateClass,
    pub neighborhood: Option<NeighborhoodConfig>,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.discussant, self.opponent)?;
        if let Some(c) = self.neighborhood {
            write!(f, "|{}", c.as_str())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Events in the cell.
    pub n: usize,
    /// Events where the discussant moved toward the opponent.
    pub successes: usize,
    /// `None` for an empty cell or an untested matrix.
    pub p_value: Option<f64>,
    pub significant: bool,
}

impl Cell {
    /// Persuasive rate; `None` for an empty cell.
    pub fn p_hat(&self) -> Option<f64> {
        (self.n > 0).then(|| self.successes as f64 / self.n as f64)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub spec: MatrixSpec,
    pub cells: BTreeMap<CellKey, Cell>,
    /// Observations that fell outside every cell (neutral level, missing
    /// neighborhood, outside the window).
    pub excluded: usize,
    /// Set once a permutation test has filled in p-values.
    pub test: Option<TestSettings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSettings {
    pub n_perm: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl TransitionMatrix {
    pub fn cell(&self, key: &CellKey) -> &Cell {
        &self.cells[key]
    }

    /// Cell for `(discussant, opponent)` without neighborhood conditioning.
    pub fn pair(&self, discussant: StateClass, opponent: StateClass) -> &Cell {
        self.cell(&CellKey {
            discussant,
            opponent,
            neighborhood: None,
        })
    }

    pub fn keys(spec: &MatrixSpec) -> Vec<CellKey> {
        let classes = StateClass::all(spec.granularity);
        let hoods: Vec<Option<NeighborhoodConfig>> = match spec.conditioning {
            Conditioning::Pair => vec![None],
            Conditioning::PairNeighborhood => NeighborhoodConfig::ALL.into_iter().map(Some).collect(),
        };
        let mut keys = Vec::new();
        for &neighborhood in &hoods {
            for &discussant in &classes {
                for &opponent in &classes {
                    keys.push(CellKey {
                        discussant,
                        opponent,
                        neighborhood,
                    });
                }
            }
        }
        keys.sort();
        keys
    }

    /// Cell of an observation under `spec`, or `None` if it is excluded.
    pub fn key_of(spec: &MatrixSpec, obs: &Observation) -> Option<CellKey> {
        if let Some(w) = &spec.window {
            if !w.contains(&obs.t) {
                return None;
            }
        }
        let neighborhood = match spec.conditioning {
            Conditioning::Pair => None,
            Conditioning::PairNeighborhood => Some(obs.neighborhood?),
        };
        Some(CellKey {
            discussant: StateClass::of(obs.discussant, spec.granularity)?,
            opponent: StateClass::of(obs.opponent, spec.granularity)?,
            neighborhood,
        })
    }
}

/// Macrostate matrix under `conditioning`, pooled over all iterations.
pub fn estimate_matrix(observations: &[Observation], conditioning: Conditioning) -> TransitionMatrix {
    estimate_matrix_with(observations, &MatrixSpec::new(conditioning))
}

pub fn estimate_matrix_with(observations: &[Observation], spec: &MatrixSpec) -> TransitionMatrix {
    let mut cells: BTreeMap<CellKey, Cell> = TransitionMatrix::keys(spec)
        .into_iter()
        .map(|k| {
            (
                k,
                Cell {
                    n: 0,
                    successes: 0,
                    p_value: None,
                    significant: false,
                },
            )
        })
        .collect();
    let mut excluded = 0;
    for obs in observations {
        match TransitionMatrix::key_of(spec, obs) {
            Some(k) => {
                let c = cells.get_mut(&k).expect("key enumerated");
                c.n += 1;
                c.successes += usize::from(obs.moved_toward);
            }
            None => excluded += 1,
        }
    }
    TransitionMatrix {
        spec: spec.clone(),
        cells,
        excluded,
        test: None,
    }
}
