//! Opinion dynamics driven by pairwise debates on homophilic scale-free
//! networks.
//!
//! The pipeline is: generate an attributed network ([`netgen`]), seed the
//! two groups at opposite ends of a 7-point scale ([`opinion`]), let every
//! agent debate a random neighbor each iteration ([`simulator`], [`debate`])
//! under a decision policy ([`backends`]), and estimate conditional
//! persuasion rates with a permutation test ([`analysis`]). [`grid`] runs
//! whole parameter sweeps from a [`config`] file.
//!
//! ```
//! use debatenet::backends::{DriftBackend, DriftParams};
//! use debatenet::netgen::{generate_network, NetworkConfig};
//! use debatenet::opinion::{initialize_opinions, ScenarioSpec, Statement};
//! use debatenet::simulator::{run_simulation, SimulationSpec};
//!
//! let g = generate_network(&NetworkConfig::new(100, 0.3, 0.5, 1)).unwrap();
//! let scenario = ScenarioSpec::base();
//! let initial = initialize_opinions(&g, &scenario);
//! let backend = DriftBackend::new(DriftParams::default()).unwrap();
//! let spec = SimulationSpec::new(Statement::new("Cities should ban cars.").unwrap(), scenario);
//! let run = run_simulation(&g, &initial, &backend, &spec, 20, 7).unwrap();
//! assert_eq!(run.states.len(), 21);
//! ```

pub mod analysis;
pub mod backends;
pub mod config;
pub mod debate;
pub mod digest;
pub mod grid;
pub mod netgen;
pub mod opinion;
pub mod rng;
pub mod simulator;
