use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use debatenet::analysis::matrix_report;
use debatenet::backends::{DriftParams, ScriptedPolicy};
use debatenet::config::{validate_config, BackendConfig, Config};
use debatenet::grid::{analyze, plan_grid, run_grid, write_matrices, GridManifest, MANIFEST_FILE};
use debatenet::netgen::{generate_network, mixing_stats, write_graph, NetworkConfig};
use debatenet::opinion::Direction;
use debatenet::rng::{derive_seed, tag};
use debatenet::simulator::read_events;

#[derive(Parser)]
#[command(name = "debatenet", version, about = "Debate-driven opinion dynamics on homophilic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file. Without one, defaults with the drift backend.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the backend section with the defaults of another kind.
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Scripted,
    Drift,
    Chat,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and print it with defaults filled in.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Generate the networks of the grid.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Run one scenario of the grid.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Homophily; defaults to the first configured value.
        #[arg(long)]
        h: Option<f64>,
        /// Minority fraction; defaults to the first configured value.
        #[arg(long)]
        fa: Option<f64>,
        #[arg(long, value_enum, default_value = "base")]
        direction: DirectionArg,
        #[arg(long)]
        awareness: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the full cross product of the grid.
    Grid {
        #[command(flatten)]
        common: Common,
        /// Print the planned runs and exit.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Estimate and test matrices from an event log.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Event log written by `simulate` or `grid`.
        #[arg(long)]
        events: PathBuf,
    },
    /// Collect plot inputs and significance-masked tables from a grid output.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Base,
    Reverse,
}

const DEFAULT_CONFIG: &str = "[backend]\nkind = \"drift\"\n";

fn load(common: &Common) -> Result<Config, String> {
    let text = match &common.config {
        Some(p) => fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut config = validate_config(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &common.out {
        config.output = out.clone();
    }
    if let Some(kind) = common.backend {
        let replacement = match kind {
            BackendKind::Scripted => BackendConfig::Scripted {
                discussant: ScriptedPolicy::AlwaysAccept,
                opponent: ScriptedPolicy::AlwaysReject,
            },
            BackendKind::Drift => BackendConfig::Drift(DriftParams::default()),
            BackendKind::Chat => BackendConfig::Chat(Default::default()),
        };
        if replacement.kind() != config.backend.kind() {
            config.backend = replacement;
        }
    }
    Ok(config)
}

fn finish(manifest: &GridManifest, out: &Path) -> ExitCode {
    let failed: Vec<_> = manifest.failed().collect();
    println!(
        "{} runs, {} failed; manifest at {}",
        manifest.cells.len(),
        failed.len(),
        out.join(MANIFEST_FILE).display()
    );
    for c in &failed {
        eprintln!("{}: {}", c.plan.id, c.error.as_deref().unwrap_or(""));
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Validate { common } => {
            print!("{}", load(&common)?.to_toml());
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate { common } => {
            let config = load(&common)?;
            let dir = config.output.join("networks");
            fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            let mut done = Vec::new();
            for cell in plan_grid(&config) {
                if done.contains(&cell.network) {
                    continue;
                }
                let nc = NetworkConfig::new(config.network.n, cell.minority_fraction, cell.homophily, cell.network_seed)
                    .with_links(config.network.m);
                let g = generate_network(&nc).map_err(|e| format!("{}: {e}", cell.network))?;
                write_graph(&g, &dir, &cell.network).map_err(|e| e.to_string())?;
                let stats = serde_json::to_string(&mixing_stats(&g)).map_err(|e| e.to_string())?;
                println!("{} {stats}", cell.network);
                done.push(cell.network);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            common,
            h,
            fa,
            direction,
            awareness,
            jobs,
        } => {
            let mut config = load(&common)?;
            let h = h.unwrap_or(config.network.homophily[0]);
            let fa = fa.unwrap_or(config.network.minority_fraction[0]);
            config.network.homophily = vec![h];
            config.network.minority_fraction = vec![fa];
            config.scenario.directions = vec![match direction {
                DirectionArg::Base => Direction::Base,
                DirectionArg::Reverse => Direction::Reverse,
            }];
            config.scenario.awareness = vec![awareness];
            config.scenario.reverse_at_balanced = true;
            // re-check the overridden values
            let config = validate_config(&config.to_toml()).map_err(|e| e.to_string())?;
            let manifest = run_grid(&config, &config.output, jobs).map_err(|e| e.to_string())?;
            Ok(finish(&manifest, &config.output))
        }
        Command::Grid { common, dry_run, jobs } => {
            let config = load(&common)?;
            if dry_run {
                let plan = plan_grid(&config);
                for c in &plan {
                    println!("{} network={} seed={}", c.id, c.network, c.seed);
                }
                println!("{} runs", plan.len());
                return Ok(ExitCode::SUCCESS);
            }
            let manifest = run_grid(&config, &config.output, jobs).map_err(|e| e.to_string())?;
            Ok(finish(&manifest, &config.output))
        }
        Command::Analyze { common, events } => {
            let config = load(&common)?;
            let file = fs::File::open(&events).map_err(|e| format!("{}: {e}", events.display()))?;
            let events = read_events(BufReader::new(file)).map_err(|e| e.to_string())?;
            let observations: Vec<_> = events.iter().map(Into::into).collect();
            let seed = derive_seed(config.master_seed, &[tag::PERMUTATION]);
            let matrices = analyze(&observations, &config.analysis, seed).map_err(|e| e.to_string())?;
            fs::create_dir_all(&config.output).map_err(|e| e.to_string())?;
            write_matrices(&config.output, &config.output, &matrices).map_err(|e| e.to_string())?;
            for m in &matrices {
                let r = matrix_report(m);
                println!("{} (excluded {})", m.spec.conditioning.as_str(), m.excluded);
                print!("{}", r.table(false));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { common } => {
            let config = load(&common)?;
            let root = &config.output;
            let path = root.join(MANIFEST_FILE);
            let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let manifest: GridManifest = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            let dir = root.join("report");
            fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            let mut index = Vec::new();
            for cell in &manifest.cells {
                let find = |name: &str| cell.files.iter().find(|f| f.path.ends_with(name)).map(|f| f.path.clone());
                for stem in ["matrix_pair", "matrix_pair_neighborhood"] {
                    let Some(p) = find(&format!("{stem}.csv")) else { continue };
                    let report = debatenet::analysis::parse_matrix_csv(
                        &fs::read_to_string(root.join(&p)).map_err(|e| e.to_string())?,
                    )
                    .map_err(|e| format!("{p}: {e}"))?;
                    let table = format!("full\n{}\nsignificant only\n{}", report.table(false), report.table(true));
                    fs::write(dir.join(format!("{}_{stem}.txt", cell.plan.id)), table).map_err(|e| e.to_string())?;
                }
                index.push(serde_json::json!({
                    "id": cell.plan.id,
                    "status": cell.status,
                    "trajectory": find("trajectory.csv"),
                    "matrix_pair": find("matrix_pair.csv"),
                    "matrix_pair_neighborhood": find("matrix_pair_neighborhood.csv"),
                }));
            }
            let index = serde_json::to_string_pretty(&index).map_err(|e| e.to_string())?;
            fs::write(dir.join("index.json"), index + "\n").map_err(|e| e.to_string())?;
            println!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
