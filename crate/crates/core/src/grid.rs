//! Scenario grids: the cross product of homophily, minority fraction,
//! direction and awareness, with one network per `(h, f_a)`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    estimate_matrix_with, matrix_report, permutation_test, AnalysisError, Conditioning, MatrixSpec, Observation,
    TransitionMatrix,
};
use crate::config::{AnalysisSection, Config};
use crate::digest::{blob_digest, file_digest};
use crate::netgen::{generate_network, write_graph, AttributedGraph, NetworkConfig};
use crate::opinion::{initialize_opinions_with, Direction, ScenarioSpec};
use crate::rng::{derive_seed, tag};
use crate::simulator::{run_simulation, SimulationError, SimulationSpec};

pub const MANIFEST_FILE: &str = "grid_manifest.json";

/// One run of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPlan {
    pub id: String,
    pub homophily: f64,
    pub minority_fraction: f64,
    pub direction: Direction,
    pub awareness: bool,
    pub network: String,
    pub network_seed: u64,
    pub seed: u64,
}

fn network_id(h: f64, fa: f64) -> String {
    format!("h{h:.2}_fa{fa:.2}")
}

/// Cells in a fixed order: homophily, then minority fraction, direction and
/// awareness.
pub fn plan_grid(config: &Config) -> Vec<CellPlan> {
    let mut cells = Vec::new();
    let sc = &config.scenario;
    for &h in &config.network.homophily {
        for &fa in &config.network.minority_fraction {
            for &direction in &sc.directions {
                if direction == Direction::Reverse && fa == 0.5 && !sc.reverse_at_balanced {
                    continue;
                }
                for &awareness in &sc.awareness {
                    let key = [h.to_bits(), fa.to_bits(), direction as u64, u64::from(awareness)];
                    let mut id = format!("{}_{}", network_id(h, fa), direction.as_str());
                    if awareness {
                        id.push_str("_aware");
                    }
                    let (network, network_seed) = if config.network.regenerate_per_run {
                        (id.clone(), derive_seed(config.master_seed, &[tag::NETWORK, key[0], key[1], key[2], key[3]]))
                    } else {
                        (network_id(h, fa), derive_seed(config.master_seed, &[tag::NETWORK, key[0], key[1]]))
                    };
                    cells.push(CellPlan {
                        id,
                        homophily: h,
                        minority_fraction: fa,
                        direction,
                        awareness,
                        network,
                        network_seed,
                        seed: derive_seed(config.master_seed, &[tag::GRID, key[0], key[1], key[2], key[3]]),
                    });
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub id: String,
    pub homophily: f64,
    pub minority_fraction: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    #[serde(flatten)]
    pub plan: CellPlan,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub schema_version: u32,
    pub config_digest: String,
    pub networks: Vec<NetworkEntry>,
    pub cells: Vec<CellEntry>,
}

impl GridManifest {
    pub fn failed(&self) -> impl Iterator<Item = &CellEntry> {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

fn rel(root: &Path, path: &Path) -> String {
    let r = path.strip_prefix(root).unwrap_or(path);
    r.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn entry(root: &Path, path: &Path) -> io::Result<FileEntry> {
    Ok(FileEntry {
        path: rel(root, path),
        digest: file_digest(path)?,
    })
}

fn write_file(root: &Path, path: PathBuf, contents: &str) -> io::Result<FileEntry> {
    fs::write(&path, contents)?;
    Ok(FileEntry {
        path: rel(root, &path),
        digest: blob_digest(contents.as_bytes()),
    })
}

/// Digest of the normalized configuration. The output directory is left out
/// so that the same experiment written to two places compares equal.
pub fn config_digest(config: &Config) -> String {
    let mut c = config.clone();
    c.output = PathBuf::new();
    blob_digest(c.to_toml().as_bytes())
}

/// Matrix spec from the analysis settings.
pub fn matrix_spec(analysis: &AnalysisSection, conditioning: Conditioning) -> MatrixSpec {
    MatrixSpec {
        conditioning,
        granularity: analysis.granularity,
        window: analysis.window.map(|[a, b]| a..b),
    }
}

/// Tested matrices under both conditionings.
pub fn analyze(
    observations: &[Observation],
    analysis: &AnalysisSection,
    seed: u64,
) -> Result<Vec<TransitionMatrix>, AnalysisError> {
    [Conditioning::Pair, Conditioning::PairNeighborhood]
        .into_iter()
        .map(|c| {
            let m = estimate_matrix_with(observations, &matrix_spec(analysis, c));
            permutation_test(observations, &m, analysis.n_perm, analysis.alpha, seed)
        })
        .collect()
}

/// Writes `matrix_<conditioning>.json` and `.csv` into `dir`.
pub fn write_matrices(root: &Path, dir: &Path, matrices: &[TransitionMatrix]) -> io::Result<Vec<FileEntry>> {
    let mut files = Vec::new();
    for m in matrices {
        let r = matrix_report(m);
        let stem = format!("matrix_{}", m.spec.conditioning.as_str());
        files.push(write_file(root, dir.join(format!("{stem}.json")), &r.to_json())?);
        files.push(write_file(root, dir.join(format!("{stem}.csv")), &r.to_csv())?);
    }
    Ok(files)
}

fn run_cell(config: &Config, plan: &CellPlan, g: &AttributedGraph, root: &Path) -> (Vec<FileEntry>, Option<String>) {
    let dir = root.join("runs").join(&plan.id);
    let mut files = Vec::new();
    let result = (|| -> Result<Option<String>, String> {
        fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let backend = config.backend.build().map_err(|e| e.to_string())?;
        let scenario = ScenarioSpec {
            direction: plan.direction,
            awareness: plan.awareness,
        };
        let levels = config.initial.levels().expect("validated");
        let initial = initialize_opinions_with(g, &scenario, levels);
        let mut spec = SimulationSpec::new(config.statement.clone(), scenario).with_update_mode(config.scenario.update_mode);
        spec.round_limit = config.scenario.round_limit;
        let (record, failure) = match run_simulation(g, &initial, &backend, &spec, config.iterations, plan.seed) {
            Ok(r) => (r, None),
            Err(SimulationError::Aborted { partial, message, .. }) => (*partial, Some(message)),
            Err(e) => return Err(e.to_string()),
        };
        let io_err = |e: io::Error| e.to_string();
        files.push(write_file(root, dir.join("trajectory.csv"), &record.trajectory_csv()).map_err(io_err)?);
        files.push(write_file(root, dir.join("events.jsonl"), &record.events_jsonl()).map_err(io_err)?);
        if failure.is_none() {
            let matrices =
                analyze(&record.observations(), &config.analysis, derive_seed(plan.seed, &[tag::PERMUTATION]))
                    .map_err(|e| e.to_string())?;
            files.extend(write_matrices(root, &dir, &matrices).map_err(io_err)?);
        }
        Ok(failure)
    })();
    match result {
        Ok(failure) => (files, failure),
        Err(e) => (files, Some(e)),
    }
}

/// Runs every cell, writing artifacts and `grid_manifest.json` under `out`.
/// A failing cell is recorded in the manifest and does not stop the others.
pub fn run_grid(config: &Config, out: &Path, jobs: Option<usize>) -> io::Result<GridManifest> {
    let plan = plan_grid(config);
    fs::create_dir_all(out.join("networks"))?;
    let jobs = jobs.unwrap_or_else(|| config.default_jobs()).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(io::Error::other)?;

    let mut wanted: Vec<(&str, f64, f64, u64)> = Vec::new();
    for c in &plan {
        if !wanted.iter().any(|w| w.0 == c.network) {
            wanted.push((&c.network, c.homophily, c.minority_fraction, c.network_seed));
        }
    }

    pool.install(|| -> io::Result<GridManifest> {
        let networks: Vec<(NetworkEntry, Option<AttributedGraph>)> = wanted
            .par_iter()
            .map(|&(id, h, fa, seed)| -> io::Result<_> {
                let cfg = NetworkConfig::new(config.network.n, fa, h, seed).with_links(config.network.m);
                let mut e = NetworkEntry {
                    id: id.to_string(),
                    homophily: h,
                    minority_fraction: fa,
                    seed,
                    error: None,
                    files: Vec::new(),
                };
                match generate_network(&cfg) {
                    Ok(g) => {
                        let (txt, json) = write_graph(&g, &out.join("networks"), id)?;
                        e.files = vec![entry(out, &txt)?, entry(out, &json)?];
                        Ok((e, Some(g)))
                    }
                    Err(err) => {
                        e.error = Some(err.to_string());
                        Ok((e, None))
                    }
                }
            })
            .collect::<io::Result<_>>()?;

        let cells: Vec<CellEntry> = plan
            .par_iter()
            .map(|c| {
                let (entry, g) = networks.iter().find(|(e, _)| e.id == c.network).expect("planned network");
                let (files, error) = match g {
                    Some(g) => run_cell(config, c, g, out),
                    None => (Vec::new(), Some(format!("network {}: {}", entry.id, entry.error.as_deref().unwrap_or("")))),
                };
                CellEntry {
                    plan: c.clone(),
                    status: if error.is_none() { CellStatus::Ok } else { CellStatus::Failed },
                    error,
                    files,
                }
            })
            .collect();

        let manifest = GridManifest {
            schema_version: config.schema_version,
            config_digest: config_digest(config),
            networks: networks.into_iter().map(|(e, _)| e).collect(),
            cells,
        };
        fs::write(out.join(MANIFEST_FILE), manifest.to_json())?;
        Ok(manifest)
    })
}
