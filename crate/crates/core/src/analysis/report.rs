use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::matrix::{CellKey, Conditioning, StateClass, TransitionMatrix};
use super::{AnalysisError, NeighborhoodConfig};

pub const MATRIX_CSV_HEADER: &str = "conditioning,discussant,opponent,neighborhood,n,successes,p_hat,p_value,significant";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowKey {
    pub discussant: String,
    pub opponent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighborhood: Option<NeighborhoodConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub key: RowKey,
    pub p_hat: Option<f64>,
    pub n: usize,
    pub successes: usize,
    pub p_value: Option<f64>,
    pub significant: bool,
}

/// Export form of a matrix: the JSON document and the flat CSV carry the
/// same rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub conditioning: Conditioning,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_perm: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub excluded: usize,
    pub cells: Vec<MatrixRow>,
}

pub fn matrix_report(matrix: &TransitionMatrix) -> MatrixReport {
    let cells = matrix
        .cells
        .iter()
        .map(|(k, c)| MatrixRow {
            key: RowKey {
                discussant: k.discussant.to_string(),
                opponent: k.opponent.to_string(),
                neighborhood: k.neighborhood,
            },
            p_hat: c.p_hat(),
            n: c.n,
            successes: c.successes,
            p_value: c.p_value,
            significant: c.significant,
        })
        .collect();
    MatrixReport {
        conditioning: matrix.spec.conditioning,
        n_perm: matrix.test.map(|t| t.n_perm),
        alpha: matrix.test.map(|t| t.alpha),
        excluded: matrix.excluded,
        cells,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MatrixReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(MATRIX_CSV_HEADER);
        out.push('\n');
        for r in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                self.conditioning.as_str(),
                r.key.discussant,
                r.key.opponent,
                r.key.neighborhood.map_or("", |c| c.as_str()),
                r.n,
                r.successes,
                opt(r.p_hat),
                opt(r.p_value),
                r.significant
            );
        }
        out
    }

    fn hoods(&self) -> Vec<Option<NeighborhoodConfig>> {
        let mut v: Vec<_> = self.cells.iter().map(|r| r.key.neighborhood).collect();
        v.dedup();
        v
    }

    /// Discussant rows by opponent columns, one block per neighborhood
    /// configuration. With `masked`, only significant cells show a value.
    pub fn table(&self, masked: bool) -> String {
        let mut classes: Vec<&str> = Vec::new();
        for r in &self.cells {
            if !classes.contains(&r.key.discussant.as_str()) {
                classes.push(&r.key.discussant);
            }
        }
        let mut out = String::new();
        for hood in self.hoods() {
            if let Some(h) = hood {
                let _ = writeln!(out, "[{}]", h.as_str());
            }
            let _ = write!(out, "{:>10}", "disc\\opp");
            for c in &classes {
                let _ = write!(out, " {c:>8}");
            }
            out.push('\n');
            for d in &classes {
                let _ = write!(out, "{d:>10}");
                for o in &classes {
                    let cell = self
                        .cells
                        .iter()
                        .find(|r| r.key.neighborhood == hood && r.key.discussant == *d && r.key.opponent == *o);
                    let text = match cell {
                        Some(r) if !masked || r.significant => r.p_hat.map_or("-".into(), |p| format!("{p:.3}")),
                        Some(_) => ".".into(),
                        None => "-".into(),
                    };
                    let _ = write!(out, " {text:>8}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Parses the flat CSV written by [`MatrixReport::to_csv`].
pub fn parse_matrix_csv(text: &str) -> Result<MatrixReport, AnalysisError> {
    let err = |line: usize, reason: &str| AnalysisError::Csv {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h == MATRIX_CSV_HEADER => {}
        _ => return Err(err(1, "missing or wrong header")),
    }
    let mut conditioning = None;
    let mut cells = Vec::new();
    for (line, l) in lines {
        if l.is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 9 {
            return Err(err(line, &format!("expected 9 fields, found {}", f.len())));
        }
        let c = match f[0] {
            "pair" => Conditioning::Pair,
            "pair_neighborhood" => Conditioning::PairNeighborhood,
            other => return Err(err(line, &format!("unknown conditioning {other:?}"))),
        };
        if *conditioning.get_or_insert(c) != c {
            return Err(err(line, "mixed conditioning"));
        }
        for class in [f[1], f[2]] {
            if StateClass::parse(class).is_none() {
                return Err(err(line, &format!("unknown class {class:?}")));
            }
        }
        let neighborhood = match f[3] {
            "" => None,
            s => Some(NeighborhoodConfig::parse(s).ok_or_else(|| err(line, &format!("unknown neighborhood {s:?}")))?),
        };
        if neighborhood.is_some() != (c == Conditioning::PairNeighborhood) {
            return Err(err(line, "neighborhood does not match conditioning"));
        }
        let int = |s: &str, what: &str| s.parse::<usize>().map_err(|_| err(line, &format!("bad {what} {s:?}")));
        let float = |s: &str, what: &str| -> Result<Option<f64>, AnalysisError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| err(line, &format!("bad {what} {s:?}")))
            }
        };
        let significant = match f[8] {
            "true" => true,
            "false" => false,
            s => return Err(err(line, &format!("bad significant {s:?}"))),
        };
        cells.push(MatrixRow {
            key: RowKey {
                discussant: f[1].to_string(),
                opponent: f[2].to_string(),
                neighborhood,
            },
            n: int(f[4], "n")?,
            successes: int(f[5], "successes")?,
            p_hat: float(f[6], "p_hat")?,
            p_value: float(f[7], "p_value")?,
            significant,
        });
    }
    Ok(MatrixReport {
        conditioning: conditioning.unwrap_or(Conditioning::Pair),
        n_perm: None,
        alpha: None,
        excluded: 0,
        cells,
    })
}

impl RowKey {
    pub fn cell_key(&self) -> Option<CellKey> {
        Some(CellKey {
            discussant: StateClass::parse(&self.discussant)?,
            opponent: StateClass::parse(&self.opponent)?,
            neighborhood: self.neighborhood,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{estimate_matrix, permutation_test, Observation};
    use crate::opinion::Opinion;

    fn op(l: u8) -> Opinion {
        Opinion::new(l as i64).unwrap()
    }

    fn tested() -> TransitionMatrix {
        let mut obs = Vec::new();
        for i in 0..100 {
            obs.push(Observation::new(op(1), op(5), i32::from(i < 83) as i8));
            obs.push(Observation::new(op(5), op(1), -i32::from(i < 10) as i8));
            obs.push(Observation::new(op(1), op(2), i32::from(i < 45) as i8));
        }
        let m = estimate_matrix(&obs, Conditioning::Pair);
        permutation_test(&obs, &m, 999, 0.01, 4).unwrap()
    }

    #[test]
    fn masked_table_hides_insignificant_cells() {
        let r = matrix_report(&tested());
        let low_low = r.cells.iter().find(|c| c.key.discussant == "low" && c.key.opponent == "low").unwrap();
        assert!(!low_low.significant);
        let low_high = r.cells.iter().find(|c| c.key.discussant == "low" && c.key.opponent == "high").unwrap();
        assert!(low_high.significant);
        let masked = r.table(true);
        let full = r.table(false);
        assert!(masked.contains("0.830") && full.contains("0.830"));
        assert!(full.contains("0.450") && !masked.contains("0.450"));
    }

    #[test]
    fn csv_round_trip() {
        let r = matrix_report(&tested());
        let back = parse_matrix_csv(&r.to_csv()).unwrap();
        assert_eq!(back.cells, r.cells);
        assert_eq!(back.conditioning, r.conditioning);
    }

    #[test]
    fn json_round_trip_and_shape() {
        let r = matrix_report(&tested());
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["conditioning"], "pair");
        let cell = &v["cells"][0];
        for field in ["key", "p_hat", "n", "p_value", "significant"] {
            assert!(cell.get(field).is_some(), "{field}");
        }
        let back: MatrixReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let bad = format!("{MATRIX_CSV_HEADER}\npair,low,high,,3,x,,,false\n");
        match parse_matrix_csv(&bad) {
            Err(AnalysisError::Csv { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_matrix_csv("nope\n").is_err());
    }
}
