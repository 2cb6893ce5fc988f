//! Bounded pairwise debate between a discussant and a stubborn opponent.
//!
//! The discussant opens by stating its opinion. Each round the opponent
//! decides first: `ACCEPT` or `IGNORE` ends the debate with no change,
//! `REJECT` hands the turn to the discussant. The discussant then either
//! accepts (moves one level toward the opponent), rejects (moves one level
//! away) or ignores (the next round starts). Only the discussant's opinion
//! can change.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, PersuasionBackend};
use crate::opinion::{Histogram, Opinion, Statement};
use crate::rng::StreamRng;

pub const DEFAULT_ROUND_LIMIT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Decision {
    Accept,
    Reject,
    Ignore,
}

impl Decision {
    pub const ALL: [Decision; 3] = [Decision::Accept, Decision::Reject, Decision::Ignore];

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Accept => "ACCEPT",
            Decision::Reject => "REJECT",
            Decision::Ignore => "IGNORE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Discussant,
    Opponent,
}

/// Everything a backend may look at when deciding a turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateContext {
    pub statement: Statement,
    pub discussant_opinion: Opinion,
    pub opponent_opinion: Opinion,
    /// Opinion counts of the discussant's neighbors; present only when the
    /// scenario enables neighborhood awareness.
    pub neighborhood: Option<Histogram>,
    pub round_limit: usize,
}

impl DebateContext {
    pub fn new(statement: Statement, discussant: Opinion, opponent: Opinion) -> Self {
        DebateContext {
            statement,
            discussant_opinion: discussant,
            opponent_opinion: opponent,
            neighborhood: None,
            round_limit: DEFAULT_ROUND_LIMIT,
        }
    }

    pub fn with_neighborhood(mut self, neighborhood: Option<Histogram>) -> Self {
        self.neighborhood = neighborhood;
        self
    }

    pub fn with_round_limit(mut self, rounds: usize) -> Self {
        self.round_limit = rounds;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub round: usize,
    pub role: Role,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
    /// Verbatim backend reply, when the backend produces text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    /// No decision token could be parsed; `decision` is the `IGNORE` fallback.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub parse_failure: bool,
}

/// The previous turns of the current debate.
#[derive(Debug, Clone, Copy)]
pub struct Transcript<'a> {
    pub opening: Option<&'a str>,
    pub turns: &'a [Turn],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminal {
    pub role: Role,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateOutcome {
    /// Change of the discussant's opinion: -1, 0 or +1.
    pub delta: i8,
    pub rounds_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opening: Option<String>,
    pub turn_log: Vec<Turn>,
    /// The decision that ended the debate; `None` when rounds ran out.
    pub terminal: Option<Terminal>,
}

impl DebateOutcome {
    pub fn parse_failure(&self) -> bool {
        self.turn_log.iter().any(|t| t.parse_failure)
    }
}

#[derive(Debug, Error)]
pub enum DebateError {
    #[error("round limit must be at least 1")]
    ZeroRounds,
    #[error("backend failed after {} turns: {source}", partial.len())]
    Backend {
        #[source]
        source: BackendError,
        opening: Option<String>,
        partial: Vec<Turn>,
    },
}

/// Opinion change implied by a discussant decision. Accepting moves one level
/// toward the opponent, rejecting one level away; equal opinions and `IGNORE`
/// leave the opinion unchanged.
pub fn decision_delta(decision: Decision, discussant: Opinion, opponent: Opinion) -> i8 {
    let toward = match opponent.cmp(&discussant) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
    };
    match decision {
        Decision::Accept => toward,
        Decision::Reject => -toward,
        Decision::Ignore => 0,
    }
}

/// `clamp(o + delta, 0, 6)`.
pub fn apply_delta(opinion: Opinion, delta: i8) -> Opinion {
    debug_assert!((-1..=1).contains(&delta));
    let level = (opinion.level() as i64 + delta as i64).clamp(0, 6);
    Opinion::new(level).expect("clamped into range")
}

/// Runs one debate. `rng` is the stream handed to the backend for every turn.
pub fn run_debate<B: PersuasionBackend + ?Sized>(
    ctx: &DebateContext,
    backend: &B,
    rng: &mut StreamRng,
) -> Result<DebateOutcome, DebateError> {
    if ctx.round_limit == 0 {
        return Err(DebateError::ZeroRounds);
    }
    let opening = match backend.open(ctx, rng) {
        Ok(o) => o,
        Err(source) => {
            return Err(DebateError::Backend {
                source,
                opening: None,
                partial: Vec::new(),
            })
        }
    };
    let mut turns: Vec<Turn> = Vec::with_capacity(2 * ctx.round_limit);
    let mut rounds_used = 0;
    let mut terminal = None;
    let mut delta = 0;

    'rounds: for round in 1..=ctx.round_limit {
        rounds_used = round;
        for role in [Role::Opponent, Role::Discussant] {
            let transcript = Transcript {
                opening: opening.as_deref(),
                turns: &turns,
            };
            let reply = match backend.decide(ctx, role, transcript, rng) {
                Ok(r) => r,
                Err(source) => {
                    return Err(DebateError::Backend {
                        source,
                        opening,
                        partial: turns,
                    })
                }
            };
            let decision = reply.decision;
            turns.push(Turn {
                round,
                role,
                decision,
                justification: reply.justification,
                raw: reply.raw,
                parse_failure: reply.parse_failure,
            });
            // opponent REJECT and discussant IGNORE keep the debate going
            let continues = match role {
                Role::Opponent => decision == Decision::Reject,
                Role::Discussant => decision == Decision::Ignore,
            };
            if !continues {
                if role == Role::Discussant {
                    delta = decision_delta(decision, ctx.discussant_opinion, ctx.opponent_opinion);
                }
                terminal = Some(Terminal { role, decision });
                break 'rounds;
            }
        }
    }

    Ok(DebateOutcome {
        delta,
        rounds_used,
        opening,
        turn_log: turns,
        terminal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{ScriptedBackend, ScriptedPolicy};
    use crate::rng::stream;

    fn op(l: i64) -> Opinion {
        Opinion::new(l).unwrap()
    }

    fn ctx(d: i64, o: i64) -> DebateContext {
        DebateContext::new(Statement::new("s").unwrap(), op(d), op(o))
    }

    fn run(d: i64, o: i64, opp: ScriptedPolicy, disc: ScriptedPolicy) -> DebateOutcome {
        let backend = ScriptedBackend::new(disc, opp);
        run_debate(&ctx(d, o), &backend, &mut stream(0, &[])).unwrap()
    }

    #[test]
    fn accept_moves_toward_opponent() {
        let out = run(2, 5, ScriptedPolicy::AlwaysReject, ScriptedPolicy::AlwaysAccept);
        assert_eq!(out.delta, 1);
        assert_eq!(out.rounds_used, 1);
        assert_eq!(
            out.terminal,
            Some(Terminal {
                role: Role::Discussant,
                decision: Decision::Accept
            })
        );
    }

    #[test]
    fn reject_backfires() {
        let out = run(2, 5, ScriptedPolicy::AlwaysReject, ScriptedPolicy::AlwaysReject);
        assert_eq!(out.delta, -1);
        let out = run(5, 2, ScriptedPolicy::AlwaysReject, ScriptedPolicy::AlwaysReject);
        assert_eq!(out.delta, 1);
    }

    #[test]
    fn opponent_accept_ends_immediately() {
        let out = run(2, 5, ScriptedPolicy::AlwaysAccept, ScriptedPolicy::AlwaysAccept);
        assert_eq!(out.delta, 0);
        assert_eq!(out.rounds_used, 1);
        assert_eq!(out.turn_log.len(), 1);
        assert_eq!(out.turn_log[0].role, Role::Opponent);
    }

    #[test]
    fn all_ignore_exhausts_rounds() {
        let out = run(2, 5, ScriptedPolicy::AlwaysReject, ScriptedPolicy::AlwaysIgnore);
        assert_eq!(out.delta, 0);
        assert_eq!(out.rounds_used, 3);
        assert_eq!(out.turn_log.len(), 6);
        assert_eq!(out.terminal, None);
        let out = run(2, 5, ScriptedPolicy::AlwaysIgnore, ScriptedPolicy::AlwaysIgnore);
        assert_eq!((out.delta, out.rounds_used), (0, 1));
    }

    #[test]
    fn equal_opinions_never_move() {
        for l in 0..7 {
            for d in Decision::ALL {
                assert_eq!(decision_delta(d, op(l), op(l)), 0);
            }
        }
    }

    #[test]
    fn clamping() {
        assert_eq!(apply_delta(op(0), -1), op(0));
        assert_eq!(apply_delta(op(6), 1), op(6));
        assert_eq!(apply_delta(op(3), 1), op(4));
        assert_eq!(apply_delta(op(3), 0), op(3));
    }

    #[test]
    fn zero_rounds_rejected() {
        let backend = ScriptedBackend::new(ScriptedPolicy::AlwaysAccept, ScriptedPolicy::AlwaysReject);
        let r = run_debate(&ctx(1, 2).with_round_limit(0), &backend, &mut stream(0, &[]));
        assert!(matches!(r, Err(DebateError::ZeroRounds)));
    }

    #[test]
    fn backend_failure_carries_partial_log() {
        // table covers the opponent turn but not the discussant's
        let opp = ScriptedPolicy::table([((1, 4), Decision::Reject)]);
        let disc = ScriptedPolicy::table([]);
        let backend = ScriptedBackend::new(disc, opp);
        match run_debate(&ctx(1, 4), &backend, &mut stream(0, &[])) {
            Err(DebateError::Backend { partial, source, .. }) => {
                assert_eq!(partial.len(), 1);
                assert!(matches!(source, BackendError::TableMiss { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
