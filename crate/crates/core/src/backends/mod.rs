//! Persuasion backends: the policies that produce each debate turn.
//!
//! * [`ScriptedBackend`]: fixed decisions, used as a test oracle.
//! * [`DriftBackend`]: samples decisions from configured probabilities, with
//!   separate rates for upward and downward persuasion.
//! * [`ChatBackend`]: renders prompt templates and asks a chat-completions
//!   endpoint.

mod chat;
mod drift;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debate::{DebateContext, Decision, Role, Transcript};
use crate::rng::StreamRng;

pub use chat::{
    parse_decision, render_neighborhood, render_transcript, ChatBackend, ChatBackendConfig, ChatMessage,
    ChatRequest, ChatTransport, Exchange, Fixture, HttpTransport, PromptTemplates, RecordingTransport,
    ReplayTransport, TemplatePaths, TransportError,
};
pub use drift::{drift_decide, DriftBackend, DriftParams, NeighborhoodMultipliers};
pub use scripted::{scripted_decide, ScriptedBackend, ScriptedPolicy, TableEntry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("no table entry for {role:?} with discussant {discussant} and opponent {opponent}")]
    TableMiss { role: Role, discussant: u8, opponent: u8 },
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("malformed chat reply: {0}")]
    MalformedReply(String),
    #[error("fixture: {0}")]
    Fixture(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

/// What a backend promises about its behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    /// Identical inputs and stream state give identical decisions.
    pub deterministic: bool,
    /// Debates may call the backend from several threads at once.
    pub concurrent_safe: bool,
    /// Upper bound on simultaneous calls, when the backend has one.
    pub max_in_flight: Option<usize>,
}

/// One decided turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub decision: Decision,
    pub justification: Option<String>,
    pub raw: Option<String>,
    pub parse_failure: bool,
}

impl Reply {
    pub fn bare(decision: Decision) -> Self {
        Reply {
            decision,
            justification: None,
            raw: None,
            parse_failure: false,
        }
    }
}

/// The opinion-update policy behind a debate.
pub trait PersuasionBackend: Send + Sync {
    fn capabilities(&self) -> Capabilities;

    /// The discussant's opening statement, if the backend produces text.
    fn open(&self, _ctx: &DebateContext, _rng: &mut StreamRng) -> Result<Option<String>, BackendError> {
        Ok(None)
    }

    fn decide(
        &self,
        ctx: &DebateContext,
        role: Role,
        transcript: Transcript<'_>,
        rng: &mut StreamRng,
    ) -> Result<Reply, BackendError>;
}

impl<B: PersuasionBackend + ?Sized> PersuasionBackend for Box<B> {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }

    fn open(&self, ctx: &DebateContext, rng: &mut StreamRng) -> Result<Option<String>, BackendError> {
        (**self).open(ctx, rng)
    }

    fn decide(
        &self,
        ctx: &DebateContext,
        role: Role,
        transcript: Transcript<'_>,
        rng: &mut StreamRng,
    ) -> Result<Reply, BackendError> {
        (**self).decide(ctx, role, transcript, rng)
    }
}
