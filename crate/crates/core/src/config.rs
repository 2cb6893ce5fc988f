//! Scenario and grid configuration files.
//!
//! A TOML document with a schema version, top-level run settings and the
//! sections `network`, `scenario`, `initial`, `backend` and `analysis`.
//! Grid dimensions are lists; a single scenario is a grid with one cell.
//!
//! ```toml
//! schema_version = 1
//! statement = "Remote work is better than office work."
//! iterations = 100
//! master_seed = 7
//!
//! [network]
//! n = 100
//! homophily = [0.0, 0.5, 1.0]
//! minority_fraction = [0.3]
//!
//! [backend]
//! kind = "drift"
//! p_accept_up = 0.8
//! ```

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{Granularity, DEFAULT_ALPHA, DEFAULT_PERMUTATIONS};
use crate::backends::{
    BackendError, ChatBackend, ChatBackendConfig, DriftBackend, DriftParams, PersuasionBackend, ScriptedBackend,
    ScriptedPolicy,
};
use crate::debate::DEFAULT_ROUND_LIMIT;
use crate::opinion::{Direction, InitialLevels, Opinion, Statement};
use crate::simulator::UpdateMode;

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_HOMOPHILY: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_MINORITY_FRACTIONS: [f64; 3] = [0.5, 0.3, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub n: usize,
    pub m: usize,
    pub homophily: Vec<f64>,
    pub minority_fraction: Vec<f64>,
    /// Generate a fresh network for every run instead of one per `(h, f_a)`.
    pub regenerate_per_run: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            n: 100,
            m: 2,
            homophily: DEFAULT_HOMOPHILY.to_vec(),
            minority_fraction: DEFAULT_MINORITY_FRACTIONS.to_vec(),
            regenerate_per_run: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub directions: Vec<Direction>,
    pub awareness: Vec<bool>,
    /// Run the reverse direction at `f_a = 0.5`, where it mirrors the base
    /// run with the labels swapped.
    pub reverse_at_balanced: bool,
    pub update_mode: UpdateMode,
    pub round_limit: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            directions: vec![Direction::Base, Direction::Reverse],
            awareness: vec![false],
            reverse_at_balanced: false,
            update_mode: UpdateMode::Snapshot,
            round_limit: DEFAULT_ROUND_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub majority: i64,
    pub minority: i64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            majority: Opinion::MAX.level() as i64,
            minority: Opinion::MIN.level() as i64,
        }
    }
}

impl InitialSection {
    pub fn levels(&self) -> Option<InitialLevels> {
        Some(InitialLevels {
            majority: Opinion::new(self.majority).ok()?,
            minority: Opinion::new(self.minority).ok()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Scripted {
        discussant: ScriptedPolicy,
        #[serde(default = "always_reject")]
        opponent: ScriptedPolicy,
    },
    Drift(DriftParams),
    Chat(ChatBackendConfig),
}

fn always_reject() -> ScriptedPolicy {
    ScriptedPolicy::AlwaysReject
}

impl BackendConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            BackendConfig::Scripted { .. } => "scripted",
            BackendConfig::Drift(_) => "drift",
            BackendConfig::Chat(_) => "chat",
        }
    }

    pub fn is_chat(&self) -> bool {
        matches!(self, BackendConfig::Chat(_))
    }

    fn violations(&self) -> Vec<String> {
        match self {
            BackendConfig::Scripted { .. } => Vec::new(),
            BackendConfig::Drift(p) => p.violations(),
            BackendConfig::Chat(c) => c.violations(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn PersuasionBackend>, BackendError> {
        Ok(match self {
            BackendConfig::Scripted { discussant, opponent } => {
                Box::new(ScriptedBackend::new(discussant.clone(), opponent.clone()))
            }
            BackendConfig::Drift(p) => Box::new(DriftBackend::new(*p)?),
            BackendConfig::Chat(c) => Box::new(ChatBackend::from_config(c.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub n_perm: usize,
    pub alpha: f64,
    pub granularity: Granularity,
    /// `[start, end)` iterations to pool; all when absent.
    pub window: Option<[usize; 2]>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            n_perm: DEFAULT_PERMUTATIONS,
            alpha: DEFAULT_ALPHA,
            granularity: Granularity::Macro,
            window: None,
        }
    }
}

/// A validated configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub schema_version: u32,
    pub statement: Statement,
    pub iterations: usize,
    pub master_seed: u64,
    pub output: PathBuf,
    pub network: NetworkSection,
    pub scenario: ScenarioSection,
    pub initial: InitialSection,
    pub backend: BackendConfig,
    pub analysis: AnalysisSection,
}

pub const DEFAULT_STATEMENT: &str = "Remote work is better than office work.";

const TOP_KEYS: [&str; 10] = [
    "schema_version",
    "statement",
    "iterations",
    "master_seed",
    "output",
    "network",
    "scenario",
    "initial",
    "backend",
    "analysis",
];

/// Every problem found in a configuration file.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid configuration:\n  {}", .0.join("\n  "))]
pub struct ConfigErrors(pub Vec<String>);

fn section<T: DeserializeOwned + Default>(
    table: &toml::Table,
    name: &str,
    errors: &mut Vec<String>,
) -> T {
    match table.get(name) {
        None => T::default(),
        Some(v) => match v.clone().try_into::<T>() {
            Ok(t) => t,
            Err(e) => {
                errors.push(format!("[{name}]: {}", e.message()));
                T::default()
            }
        },
    }
}

fn scalar<T: DeserializeOwned>(table: &toml::Table, key: &str, default: T, errors: &mut Vec<String>) -> T {
    match table.get(key) {
        None => default,
        Some(v) => match v.clone().try_into::<T>() {
            Ok(t) => t,
            Err(e) => {
                errors.push(format!("{key}: {}", e.message()));
                default
            }
        },
    }
}

fn check_unit_list(name: &str, values: &[f64], open_upper: bool, errors: &mut Vec<String>) {
    if values.is_empty() {
        errors.push(format!("{name}: list is empty"));
    }
    for &v in values {
        let ok = if open_upper {
            v > 0.0 && v <= 0.5
        } else {
            (0.0..=1.0).contains(&v)
        };
        if !ok {
            let range = if open_upper { "(0, 0.5]" } else { "[0, 1]" };
            errors.push(format!("{name}: {v} is outside {range}"));
        }
    }
    let distinct: BTreeSet<u64> = values.iter().map(|v| v.to_bits()).collect();
    if distinct.len() != values.len() {
        errors.push(format!("{name}: duplicate values"));
    }
}

/// Parses and checks a configuration, reporting every violation.
pub fn validate_config(text: &str) -> Result<Config, ConfigErrors> {
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigErrors(vec![e.message().to_string()]))?;
    let mut errors = Vec::new();

    for key in table.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            errors.push(format!("unknown key `{key}`"));
        }
    }

    let schema_version = scalar(&table, "schema_version", SCHEMA_VERSION, &mut errors);
    if schema_version != SCHEMA_VERSION {
        errors.push(format!("schema_version {schema_version} is not supported (expected {SCHEMA_VERSION})"));
    }
    let statement_text: String = scalar(&table, "statement", DEFAULT_STATEMENT.to_string(), &mut errors);
    let statement = Statement::new(statement_text).unwrap_or_else(|_| {
        errors.push("statement: must not be empty".into());
        Statement::new(DEFAULT_STATEMENT).expect("non-empty")
    });
    let iterations: usize = scalar(&table, "iterations", 100, &mut errors);
    if iterations == 0 {
        errors.push("iterations: must be at least 1".into());
    }
    let master_seed: u64 = scalar(&table, "master_seed", 0, &mut errors);
    let output: PathBuf = scalar(&table, "output", PathBuf::from("out"), &mut errors);

    let network: NetworkSection = section(&table, "network", &mut errors);
    if network.m == 0 {
        errors.push("network.m: must be at least 1".into());
    }
    let seed_size = (network.m + 1).max(3);
    if network.n < seed_size {
        errors.push(format!("network.n: {} is below the seed size {seed_size}", network.n));
    }
    check_unit_list("network.homophily", &network.homophily, false, &mut errors);
    check_unit_list("network.minority_fraction", &network.minority_fraction, true, &mut errors);

    let scenario: ScenarioSection = section(&table, "scenario", &mut errors);
    if scenario.directions.is_empty() {
        errors.push("scenario.directions: list is empty".into());
    }
    if scenario.awareness.is_empty() {
        errors.push("scenario.awareness: list is empty".into());
    }
    if scenario.round_limit == 0 {
        errors.push("scenario.round_limit: must be at least 1".into());
    }

    let initial: InitialSection = section(&table, "initial", &mut errors);
    for (name, v) in [("majority", initial.majority), ("minority", initial.minority)] {
        if !(0..=6).contains(&v) {
            errors.push(format!("initial.{name}: {v} is outside 0..=6"));
        }
    }

    let backend = match table.get("backend") {
        None => {
            errors.push("missing [backend] section".into());
            None
        }
        Some(v) => match v.clone().try_into::<BackendConfig>() {
            Ok(b) => {
                errors.extend(b.violations().into_iter().map(|m| format!("[backend]: {m}")));
                Some(b)
            }
            Err(e) => {
                errors.push(format!("[backend]: {}", e.message()));
                None
            }
        },
    };

    let analysis: AnalysisSection = section(&table, "analysis", &mut errors);
    if analysis.n_perm == 0 {
        errors.push("analysis.n_perm: must be at least 1".into());
    }
    if !(analysis.alpha > 0.0 && analysis.alpha < 1.0) {
        errors.push(format!("analysis.alpha: {} is outside (0, 1)", analysis.alpha));
    }
    if let Some([a, b]) = analysis.window {
        if a >= b {
            errors.push(format!("analysis.window: [{a}, {b}] is empty"));
        }
    }

    match (errors.is_empty(), backend) {
        (true, Some(backend)) => Ok(Config {
            schema_version,
            statement,
            iterations,
            master_seed,
            output,
            network,
            scenario,
            initial,
            backend,
            analysis,
        }),
        _ => Err(ConfigErrors(errors)),
    }
}

impl Config {
    /// Normalized TOML with every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn default_jobs(&self) -> usize {
        if self.backend.is_chat() {
            1
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}
