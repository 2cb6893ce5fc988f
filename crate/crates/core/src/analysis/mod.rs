//! Conditional persuasion probabilities and their permutation test.
//!
//! An interaction is *persuasive* when the discussant moved one level toward
//! the opponent. Matrices report the persuasive rate conditioned on the
//! discussant's and opponent's opinion classes and, optionally, on how the
//! discussant's neighbors sit relative to the two positions.

mod matrix;
mod permutation;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opinion::{Histogram, Opinion};

pub use matrix::{
    estimate_matrix, estimate_matrix_with, Cell, CellKey, Conditioning, Granularity, MatrixSpec, Observation,
    StateClass, TestSettings, TransitionMatrix,
};
pub use permutation::{permutation_test, DEFAULT_ALPHA, DEFAULT_PERMUTATIONS};
pub use report::{matrix_report, parse_matrix_csv, MatrixReport, MatrixRow, RowKey, MATRIX_CSV_HEADER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("number of permutations must be at least 1")]
    NoPermutations,
    #[error("alpha {0} is outside (0, 1)")]
    Alpha(f64),
    #[error("observations do not reproduce the matrix counts")]
    MatrixMismatch,
    #[error("malformed matrix CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Coarse opinion class: levels 0–2 are low, 4–6 high, 3 neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Macrostate {
    Low,
    High,
}

impl Macrostate {
    pub fn of(o: Opinion) -> Option<Macrostate> {
        match o.level() {
            0..=2 => Some(Macrostate::Low),
            4..=6 => Some(Macrostate::High),
            _ => None,
        }
    }
}

/// Where a discussant's neighbors sit relative to the two debaters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborhoodConfig {
    /// Most neighbors are strictly closer to the opponent.
    Aligned,
    /// Most neighbors are strictly closer to the discussant.
    Misaligned,
    /// Evenly split; equidistant neighbors count for neither side.
    Mixed,
}

impl NeighborhoodConfig {
    pub const ALL: [NeighborhoodConfig; 3] = [
        NeighborhoodConfig::Aligned,
        NeighborhoodConfig::Misaligned,
        NeighborhoodConfig::Mixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NeighborhoodConfig::Aligned => "aligned",
            NeighborhoodConfig::Misaligned => "misaligned",
            NeighborhoodConfig::Mixed => "mixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        NeighborhoodConfig::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

fn classify_counts(toward_opponent: u32, toward_discussant: u32) -> NeighborhoodConfig {
    match toward_opponent.cmp(&toward_discussant) {
        std::cmp::Ordering::Greater => NeighborhoodConfig::Aligned,
        std::cmp::Ordering::Less => NeighborhoodConfig::Misaligned,
        std::cmp::Ordering::Equal => NeighborhoodConfig::Mixed,
    }
}

/// Classifies neighbor opinions by absolute level distance to the
/// discussant's pre-debate opinion and to the opponent's opinion.
pub fn classify_neighborhood(
    discussant: Opinion,
    opponent: Opinion,
    neighbors: impl IntoIterator<Item = Opinion>,
) -> NeighborhoodConfig {
    let (mut to_opp, mut to_disc) = (0, 0);
    for k in neighbors {
        let (d_opp, d_disc) = (k.distance(opponent), k.distance(discussant));
        if d_opp < d_disc {
            to_opp += 1;
        } else if d_disc < d_opp {
            to_disc += 1;
        }
    }
    classify_counts(to_opp, to_disc)
}

/// Same as [`classify_neighborhood`] from a histogram; `None` when empty.
pub fn classify_histogram(discussant: Opinion, opponent: Opinion, h: &Histogram) -> Option<NeighborhoodConfig> {
    if h.total() == 0 {
        return None;
    }
    let (mut to_opp, mut to_disc) = (0, 0);
    for k in Opinion::all() {
        let c = h.count(k);
        let (d_opp, d_disc) = (k.distance(opponent), k.distance(discussant));
        if d_opp < d_disc {
            to_opp += c;
        } else if d_disc < d_opp {
            to_disc += c;
        }
    }
    Some(classify_counts(to_opp, to_disc))
}
