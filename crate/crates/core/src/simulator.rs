//! Iterated debates on a network.
//!
//! Each iteration every non-isolated agent debates one uniformly drawn
//! neighbor. In the default snapshot mode all debates of iteration `t` read
//! the opinions at `t`, so the result does not depend on processing order or
//! thread count. Randomness comes from streams keyed by `(seed, t, agent)`.

use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{classify_histogram, NeighborhoodConfig, Observation};
use crate::backends::PersuasionBackend;
use crate::debate::{apply_delta, run_debate, DebateContext, DebateError, DebateOutcome, DEFAULT_ROUND_LIMIT};
use crate::netgen::AttributedGraph;
use crate::opinion::{trajectory_csv, Histogram, Opinion, OpinionState, ScenarioSpec, Statement};
use crate::rng::{stream, tag};

pub const EVENT_SCHEMA: &str = "debatenet.events";
pub const EVENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Debates read the start-of-iteration opinions.
    #[default]
    Snapshot,
    /// Agents update immediately, in a seeded random order. For sensitivity
    /// checks only; always runs sequentially.
    InPlace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub statement: Statement,
    pub scenario: ScenarioSpec,
    pub round_limit: usize,
    pub update_mode: UpdateMode,
}

impl SimulationSpec {
    pub fn new(statement: Statement, scenario: ScenarioSpec) -> Self {
        SimulationSpec {
            statement,
            scenario,
            round_limit: DEFAULT_ROUND_LIMIT,
            update_mode: UpdateMode::Snapshot,
        }
    }

    pub fn with_update_mode(mut self, mode: UpdateMode) -> Self {
        self.update_mode = mode;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventFlag {
    /// Some reply in the debate had no decision token.
    ParseFailure,
}

/// One debate, as logged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub t: usize,
    pub discussant: usize,
    pub opponent: usize,
    pub o_disc_pre: Opinion,
    pub o_opp: Opinion,
    pub o_disc_post: Opinion,
    pub delta: i8,
    pub moved_toward_opponent: bool,
    pub neighborhood_config: Option<NeighborhoodConfig>,
    pub outcome: DebateOutcome,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<EventFlag>,
}

impl InteractionEvent {
    fn new(
        t: usize,
        discussant: usize,
        opponent: usize,
        o_disc_pre: Opinion,
        o_opp: Opinion,
        neighborhood_config: Option<NeighborhoodConfig>,
        outcome: DebateOutcome,
    ) -> Self {
        let delta = outcome.delta;
        let flags = if outcome.parse_failure() {
            vec![EventFlag::ParseFailure]
        } else {
            Vec::new()
        };
        InteractionEvent {
            t,
            discussant,
            opponent,
            o_disc_pre,
            o_opp,
            o_disc_post: apply_delta(o_disc_pre, delta),
            delta,
            moved_toward_opponent: Observation::new(o_disc_pre, o_opp, delta).moved_toward,
            neighborhood_config,
            outcome,
            flags,
        }
    }
}

impl From<&InteractionEvent> for Observation {
    fn from(e: &InteractionEvent) -> Self {
        Observation {
            t: e.t,
            discussant: e.o_disc_pre,
            opponent: e.o_opp,
            neighborhood: e.neighborhood_config,
            delta: e.delta,
            moved_toward: e.moved_toward_opponent,
        }
    }
}

/// States `D(0..=T)` and all events of a run. `error` is set when a backend
/// failure cut the run short; the states and events then cover the completed
/// iterations only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub t_max: usize,
    pub seed: u64,
    pub states: Vec<OpinionState>,
    pub events: Vec<InteractionEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn is_complete(&self) -> bool {
        self.error.is_none() && self.states.len() == self.t_max + 1
    }

    pub fn final_state(&self) -> &OpinionState {
        self.states.last().expect("at least the initial state")
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.events.iter().map(Observation::from).collect()
    }

    pub fn trajectory_csv(&self) -> String {
        trajectory_csv(&self.states).expect("states share one node set")
    }

    pub fn events_jsonl(&self) -> String {
        let mut buf = Vec::new();
        write_events(&mut buf, &self.events).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("initial state has {found} opinions for {expected} nodes")]
    InitialSize { found: usize, expected: usize },
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("round limit must be at least 1")]
    ZeroRounds,
    #[error("run aborted at t = {t}: {message}")]
    Aborted {
        t: usize,
        message: String,
        partial: Box<RunRecord>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for one iteration; `None` uses the global pool. Ignored
    /// unless the backend is safe for concurrent calls.
    pub jobs: Option<usize>,
}

/// Seeded processing order for iteration `t`.
pub fn snapshot_update_order(n: usize, seed: u64, t: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, &[tag::ORDER, t as u64]));
    order
}

/// Neighbor drawn by agent `i` at iteration `t`; `None` for isolated nodes.
pub fn draw_neighbor(g: &AttributedGraph, seed: u64, t: usize, i: usize) -> Option<usize> {
    let nb = g.neighbors(i);
    if nb.is_empty() {
        return None;
    }
    let mut rng = stream(seed, &[tag::NEIGHBOR, t as u64, i as u64]);
    Some(nb[rng.random_range(0..nb.len())])
}

fn debate_one<B: PersuasionBackend + ?Sized>(
    g: &AttributedGraph,
    opinions: &[Opinion],
    backend: &B,
    spec: &SimulationSpec,
    seed: u64,
    t: usize,
    i: usize,
) -> Option<Result<InteractionEvent, DebateError>> {
    let j = draw_neighbor(g, seed, t, i)?;
    let (o_i, o_j) = (opinions[i], opinions[j]);
    let hood = Histogram::from_opinions(g.neighbors(i).iter().map(|&k| opinions[k]));
    let config = classify_histogram(o_i, o_j, &hood);
    let ctx = DebateContext::new(spec.statement.clone(), o_i, o_j)
        .with_neighborhood(spec.scenario.awareness.then_some(hood))
        .with_round_limit(spec.round_limit);
    let mut rng = stream(seed, &[tag::DEBATE, t as u64, i as u64]);
    Some(run_debate(&ctx, backend, &mut rng).map(|outcome| InteractionEvent::new(t, i, j, o_i, o_j, config, outcome)))
}

/// Runs `t_max` iterations from `initial`.
pub fn run_simulation<B: PersuasionBackend + ?Sized>(
    g: &AttributedGraph,
    initial: &OpinionState,
    backend: &B,
    spec: &SimulationSpec,
    t_max: usize,
    seed: u64,
) -> Result<RunRecord, SimulationError> {
    run_simulation_with(g, initial, backend, spec, t_max, seed, RunOptions::default())
}

pub fn run_simulation_with<B: PersuasionBackend + ?Sized>(
    g: &AttributedGraph,
    initial: &OpinionState,
    backend: &B,
    spec: &SimulationSpec,
    t_max: usize,
    seed: u64,
    options: RunOptions,
) -> Result<RunRecord, SimulationError> {
    let n = g.node_count();
    if initial.len() != n {
        return Err(SimulationError::InitialSize {
            found: initial.len(),
            expected: n,
        });
    }
    if t_max == 0 {
        return Err(SimulationError::NoIterations);
    }
    if spec.round_limit == 0 {
        return Err(SimulationError::ZeroRounds);
    }
    let parallel = backend.capabilities().concurrent_safe
        && spec.update_mode == UpdateMode::Snapshot
        && options.jobs != Some(1);
    let pool = match (parallel, options.jobs) {
        (true, Some(j)) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .expect("thread pool"),
        ),
        _ => None,
    };

    let mut record = RunRecord {
        t_max,
        seed,
        states: vec![OpinionState::new(0, initial.opinions.clone())],
        events: Vec::new(),
        error: None,
    };
    for t in 0..t_max {
        let current = &record.states[t].opinions;
        let step = match spec.update_mode {
            UpdateMode::Snapshot => {
                let run = || -> Vec<Option<Result<InteractionEvent, DebateError>>> {
                    if parallel {
                        (0..n)
                            .into_par_iter()
                            .map(|i| debate_one(g, current, backend, spec, seed, t, i))
                            .collect()
                    } else {
                        (0..n).map(|i| debate_one(g, current, backend, spec, seed, t, i)).collect()
                    }
                };
                let results = match &pool {
                    Some(p) => p.install(run),
                    None => run(),
                };
                let mut next = current.clone();
                let mut events = Vec::with_capacity(n);
                let mut failure = None;
                for r in results.into_iter().flatten() {
                    match r {
                        Ok(e) => {
                            next[e.discussant] = e.o_disc_post;
                            events.push(e);
                        }
                        Err(e) => {
                            failure = Some(e);
                            break;
                        }
                    }
                }
                failure.map_or(Ok((next, events)), Err)
            }
            UpdateMode::InPlace => {
                let mut next = current.clone();
                let mut events = Vec::with_capacity(n);
                let mut failure = None;
                for i in snapshot_update_order(n, seed, t) {
                    match debate_one(g, &next, backend, spec, seed, t, i) {
                        None => {}
                        Some(Ok(e)) => {
                            next[i] = e.o_disc_post;
                            events.push(e);
                        }
                        Some(Err(e)) => {
                            failure = Some(e);
                            break;
                        }
                    }
                }
                events.sort_by_key(|e| e.discussant);
                failure.map_or(Ok((next, events)), Err)
            }
        };
        match step {
            Ok((next, events)) => {
                record.states.push(OpinionState::new(t + 1, next));
                record.events.extend(events);
            }
            Err(e) => {
                let message = e.to_string();
                record.error = Some(message.clone());
                return Err(SimulationError::Aborted {
                    t,
                    message,
                    partial: Box::new(record),
                });
            }
        }
    }
    Ok(record)
}

#[derive(Debug, Serialize, Deserialize)]
struct EventHeader {
    schema: String,
    version: u32,
}

/// JSONL: a schema header line, then one event per line.
pub fn write_events<W: Write>(mut w: W, events: &[InteractionEvent]) -> io::Result<()> {
    let header = EventHeader {
        schema: EVENT_SCHEMA.into(),
        version: EVENT_SCHEMA_VERSION,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

pub fn read_events<R: BufRead>(r: R) -> Result<Vec<InteractionEvent>, EventLogError> {
    let mut events = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let malformed = |reason: String| EventLogError::Malformed { line: i + 1, reason };
        if i == 0 {
            let h: EventHeader = serde_json::from_str(&line).map_err(|e| malformed(format!("bad header: {e}")))?;
            if h.schema != EVENT_SCHEMA || h.version != EVENT_SCHEMA_VERSION {
                return Err(malformed(format!("unsupported schema {} v{}", h.schema, h.version)));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?);
    }
    Ok(events)
}
