//! Chat-completions backend.
//!
//! Each turn renders a plain-text prompt template, sends it as one user
//! message, and reads the decision from the reply: the first word-bounded,
//! case-insensitive `ACCEPT`, `REJECT` or `IGNORE`. A reply without a token
//! counts as `IGNORE` and is flagged as a parse failure.

mod transport;

use std::path::PathBuf;
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{BackendError, Capabilities, PersuasionBackend, Reply};
use crate::debate::{DebateContext, Decision, Role, Transcript};
use crate::opinion::{Histogram, Opinion};
use crate::rng::StreamRng;

pub use transport::{
    ChatTransport, Exchange, Fixture, HttpTransport, RecordingTransport, ReplayTransport, TransportError,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

/// Optional template overrides; missing entries use the bundled files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplatePaths {
    pub opening: Option<PathBuf>,
    pub discussant: Option<PathBuf>,
    pub opponent: Option<PathBuf>,
    pub awareness: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatBackendConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub max_in_flight: usize,
    /// Rounds of history included in `{transcript}`; the opening statement is
    /// always included.
    pub transcript_window: usize,
    pub discussant_name: String,
    pub opponent_name: String,
    pub templates: TemplatePaths,
}

impl Default for ChatBackendConfig {
    fn default() -> Self {
        ChatBackendConfig {
            endpoint: "http://localhost:11434/v1/chat/completions".into(),
            model: "llama3.1".into(),
            temperature: 0.7,
            timeout_secs: 120.0,
            max_retries: 3,
            retry_backoff_ms: 500,
            api_key_env: "OPENAI_API_KEY".into(),
            max_in_flight: 4,
            transcript_window: 2,
            discussant_name: "Discussant".into(),
            opponent_name: "Opponent".into(),
            templates: TemplatePaths::default(),
        }
    }
}

impl ChatBackendConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            out.push(format!("timeout_secs = {} must be positive", self.timeout_secs));
        }
        if self.max_in_flight == 0 {
            out.push("max_in_flight must be at least 1".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            out.push(format!("temperature = {} is outside [0, 2]", self.temperature));
        }
        if self.model.trim().is_empty() {
            out.push("model is empty".into());
        }
        if self.endpoint.trim().is_empty() {
            out.push("endpoint is empty".into());
        }
        out
    }
}

/// Prompt templates with `{statement}`, `{opinion_phrase}`, `{opponent_name}`,
/// `{neighborhood_percentages}` and `{transcript}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub opening: String,
    pub discussant: String,
    pub opponent: String,
    /// Discussant prompt used when the neighborhood is visible.
    pub awareness: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            opening: include_str!("../../../templates/opening.txt").into(),
            discussant: include_str!("../../../templates/discussant.txt").into(),
            opponent: include_str!("../../../templates/opponent.txt").into(),
            awareness: include_str!("../../../templates/discussant_aware.txt").into(),
        }
    }
}

impl PromptTemplates {
    pub fn load(paths: &TemplatePaths) -> Result<Self, BackendError> {
        let mut t = PromptTemplates::default();
        for (slot, path) in [
            (&mut t.opening, &paths.opening),
            (&mut t.discussant, &paths.discussant),
            (&mut t.opponent, &paths.opponent),
            (&mut t.awareness, &paths.awareness),
        ] {
            if let Some(p) = path {
                *slot = std::fs::read_to_string(p)
                    .map_err(|e| BackendError::Config(format!("template {}: {e}", p.display())))?;
            }
        }
        Ok(t)
    }
}

struct Placeholders<'a> {
    statement: &'a str,
    opinion_phrase: &'a str,
    opponent_name: &'a str,
    neighborhood_percentages: &'a str,
    transcript: &'a str,
}

fn render(template: &str, p: &Placeholders<'_>) -> String {
    template
        .replace("{statement}", p.statement)
        .replace("{opinion_phrase}", p.opinion_phrase)
        .replace("{opponent_name}", p.opponent_name)
        .replace("{neighborhood_percentages}", p.neighborhood_percentages)
        .replace("{transcript}", p.transcript)
}

/// One line per level, e.g. `- strongly agree: 75%`.
pub fn render_neighborhood(h: &Histogram) -> String {
    Opinion::all()
        .zip(h.percentages())
        .map(|(o, pct)| format!("- {}: {pct}%", o.phrase()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The opening statement followed by the turns of the last `window` rounds.
pub fn render_transcript(transcript: Transcript<'_>, window: usize, discussant: &str, opponent: &str) -> String {
    let mut lines = Vec::new();
    if let Some(o) = transcript.opening {
        lines.push(format!("{discussant}: {}", o.trim()));
    }
    let last_round = transcript.turns.iter().map(|t| t.round).max().unwrap_or(0);
    for turn in transcript
        .turns
        .iter()
        .filter(|t| t.round + window > last_round)
    {
        let speaker = match turn.role {
            Role::Discussant => discussant,
            Role::Opponent => opponent,
        };
        let text = turn
            .raw
            .clone()
            .unwrap_or_else(|| format!("I {} your stance.", turn.decision.as_str()));
        lines.push(format!("{speaker}: {}", text.trim()));
    }
    if lines.is_empty() {
        "(no messages yet)".into()
    } else {
        lines.join("\n")
    }
}

fn decision_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(accept|reject|ignore)\b").unwrap())
}

/// First decision token in `reply`, if any.
pub fn parse_decision(reply: &str) -> Option<Decision> {
    let m = decision_regex().find(reply)?;
    match m.as_str().to_ascii_uppercase().as_str() {
        "ACCEPT" => Some(Decision::Accept),
        "REJECT" => Some(Decision::Reject),
        _ => Some(Decision::Ignore),
    }
}

fn justification(reply: &str) -> Option<String> {
    let m = decision_regex().find(reply)?;
    let rest = &reply[m.end()..];
    let lower = rest.to_ascii_lowercase();
    let idx = lower.find("because")?;
    let text = rest[idx + "because".len()..].trim().trim_end_matches('"').trim();
    (!text.is_empty()).then(|| text.to_string())
}

fn assistant_content(body: &str) -> Result<String, BackendError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| BackendError::MalformedReply(format!("not JSON: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedReply("missing choices[0].message.content".into()))
}

struct Gate {
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut n = self.in_flight.lock().unwrap();
            while *n >= self.limit {
                n = self.freed.wait(n).unwrap();
            }
            *n += 1;
        }
        let out = f();
        *self.in_flight.lock().unwrap() -= 1;
        self.freed.notify_one();
        out
    }
}

pub struct ChatBackend {
    config: ChatBackendConfig,
    templates: PromptTemplates,
    transport: Box<dyn ChatTransport>,
    gate: Gate,
}

impl ChatBackend {
    pub fn new(
        config: ChatBackendConfig,
        templates: PromptTemplates,
        transport: Box<dyn ChatTransport>,
    ) -> Result<Self, BackendError> {
        let v = config.violations();
        if !v.is_empty() {
            return Err(BackendError::Config(v.join("; ")));
        }
        let gate = Gate {
            limit: config.max_in_flight,
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        };
        Ok(ChatBackend {
            config,
            templates,
            transport,
            gate,
        })
    }

    /// HTTP transport with the key from the configured environment variable
    /// and templates loaded from the configured paths.
    pub fn from_config(config: ChatBackendConfig) -> Result<Self, BackendError> {
        let templates = PromptTemplates::load(&config.templates)?;
        let transport = HttpTransport::from_env(
            &config.endpoint,
            &config.api_key_env,
            Duration::from_secs_f64(config.timeout_secs.max(1e-3)),
        )?;
        ChatBackend::new(config, templates, Box::new(transport))
    }

    pub fn config(&self) -> &ChatBackendConfig {
        &self.config
    }

    /// The request a role would send for the given state of the debate.
    pub fn request(&self, ctx: &DebateContext, role: Option<Role>, transcript: Transcript<'_>) -> ChatRequest {
        let (template, own, counterpart) = match role {
            None => (&self.templates.opening, ctx.discussant_opinion, &self.config.opponent_name),
            Some(Role::Discussant) => (
                if ctx.neighborhood.is_some() {
                    &self.templates.awareness
                } else {
                    &self.templates.discussant
                },
                ctx.discussant_opinion,
                &self.config.opponent_name,
            ),
            Some(Role::Opponent) => (&self.templates.opponent, ctx.opponent_opinion, &self.config.discussant_name),
        };
        let neighborhood = ctx.neighborhood.as_ref().map(render_neighborhood).unwrap_or_default();
        let transcript = render_transcript(
            transcript,
            self.config.transcript_window,
            &self.config.discussant_name,
            &self.config.opponent_name,
        );
        let content = render(
            template,
            &Placeholders {
                statement: ctx.statement.text(),
                opinion_phrase: own.phrase(),
                opponent_name: counterpart,
                neighborhood_percentages: &neighborhood,
                transcript: &transcript,
            },
        );
        ChatRequest {
            model: self.config.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content,
            }],
            temperature: self.config.temperature,
        }
    }

    /// Sends `request`, retrying retryable failures with exponential backoff,
    /// and returns the assistant's message text.
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let wait = self.config.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(wait));
            }
            match self.gate.run(|| self.transport.send(request)) {
                Ok(body) => return assistant_content(&body),
                Err(e) if e.retryable => last = e.message,
                Err(e) => {
                    return Err(BackendError::Transport {
                        attempts: attempt + 1,
                        message: e.message,
                    })
                }
            }
        }
        Err(BackendError::Transport {
            attempts,
            message: last,
        })
    }

    /// Decision, justification and verbatim reply for one turn.
    pub fn chat_decide(&self, ctx: &DebateContext, role: Role, transcript: Transcript<'_>) -> Result<Reply, BackendError> {
        let text = self.complete(&self.request(ctx, Some(role), transcript))?;
        let parsed = parse_decision(&text);
        Ok(Reply {
            decision: parsed.unwrap_or(Decision::Ignore),
            justification: justification(&text),
            parse_failure: parsed.is_none(),
            raw: Some(text),
        })
    }
}

impl PersuasionBackend for ChatBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            deterministic: false,
            concurrent_safe: true,
            max_in_flight: Some(self.config.max_in_flight),
        }
    }

    fn open(&self, ctx: &DebateContext, _rng: &mut StreamRng) -> Result<Option<String>, BackendError> {
        let empty = Transcript {
            opening: None,
            turns: &[],
        };
        self.complete(&self.request(ctx, None, empty)).map(Some)
    }

    fn decide(
        &self,
        ctx: &DebateContext,
        role: Role,
        transcript: Transcript<'_>,
        _rng: &mut StreamRng,
    ) -> Result<Reply, BackendError> {
        self.chat_decide(ctx, role, transcript)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::debate::Turn;
    use crate::opinion::Statement;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn parses_first_token() {
        assert_eq!(parse_decision("…I ACCEPT your stance because…"), Some(Decision::Accept));
        assert_eq!(parse_decision("i reject this, but would accept later"), Some(Decision::Reject));
        assert_eq!(parse_decision("Ignore."), Some(Decision::Ignore));
        assert_eq!(parse_decision("I accepted nothing, unacceptable"), None);
        assert_eq!(parse_decision(""), None);
    }

    #[test]
    fn extracts_justification() {
        assert_eq!(
            justification("I REJECT your stance because the planks were replaced.\""),
            Some("the planks were replaced.".into())
        );
        assert_eq!(justification("I ACCEPT."), None);
    }

    #[test]
    fn neighborhood_rendering() {
        let h = Histogram::from_opinions([Opinion::MIN, Opinion::MAX, Opinion::MAX, Opinion::MAX]);
        let text = render_neighborhood(&h);
        assert!(text.starts_with("- strongly disagree: 25%\n- disagree: 0%"));
        assert!(text.ends_with("- strongly agree: 75%"));
    }

    #[test]
    fn transcript_window_keeps_last_rounds() {
        let turn = |round, role, raw: &str| Turn {
            round,
            role,
            decision: Decision::Reject,
            justification: None,
            raw: Some(raw.into()),
            parse_failure: false,
        };
        let turns = vec![
            turn(1, Role::Opponent, "o1"),
            turn(1, Role::Discussant, "d1"),
            turn(2, Role::Opponent, "o2"),
            turn(2, Role::Discussant, "d2"),
            turn(3, Role::Opponent, "o3"),
        ];
        let t = Transcript {
            opening: Some("hello"),
            turns: &turns,
        };
        assert_eq!(render_transcript(t, 2, "D", "O"), "D: hello\nO: o2\nD: d2\nO: o3");
        assert_eq!(render_transcript(t, 0, "D", "O"), "D: hello");
    }

    struct Flaky {
        failures: AtomicUsize,
        retryable: bool,
    }

    impl ChatTransport for Flaky {
        fn send(&self, _request: &ChatRequest) -> Result<String, TransportError> {
            if self.failures.load(Ordering::SeqCst) > 0 {
                self.failures.fetch_sub(1, Ordering::SeqCst);
                return Err(TransportError {
                    retryable: self.retryable,
                    message: "boom".into(),
                });
            }
            Ok(r#"{"choices":[{"message":{"role":"assistant","content":"I IGNORE it"}}]}"#.into())
        }
    }

    fn backend(failures: usize, retryable: bool) -> ChatBackend {
        let config = ChatBackendConfig {
            max_retries: 2,
            retry_backoff_ms: 1,
            ..ChatBackendConfig::default()
        };
        let transport = Flaky {
            failures: AtomicUsize::new(failures),
            retryable,
        };
        ChatBackend::new(config, PromptTemplates::default(), Box::new(transport)).unwrap()
    }

    fn ctx() -> DebateContext {
        DebateContext::new(Statement::new("s").unwrap(), Opinion::MIN, Opinion::MAX)
    }

    const EMPTY: Transcript<'static> = Transcript {
        opening: None,
        turns: &[],
    };

    #[test]
    fn retries_then_succeeds() {
        let r = backend(2, true).chat_decide(&ctx(), Role::Opponent, EMPTY).unwrap();
        assert_eq!(r.decision, Decision::Ignore);
    }

    #[test]
    fn retries_exhausted() {
        assert_eq!(
            backend(3, true).chat_decide(&ctx(), Role::Opponent, EMPTY),
            Err(BackendError::Transport {
                attempts: 3,
                message: "boom".into()
            })
        );
    }

    #[test]
    fn fatal_errors_are_not_retried() {
        assert_eq!(
            backend(1, false).chat_decide(&ctx(), Role::Opponent, EMPTY),
            Err(BackendError::Transport {
                attempts: 1,
                message: "boom".into()
            })
        );
    }

    #[test]
    fn prompt_placeholders_are_filled() {
        let b = backend(0, true);
        let c = ctx().with_neighborhood(Some(Histogram::from_opinions([Opinion::MAX])));
        let req = b.request(&c, Some(Role::Discussant), EMPTY);
        let content = &req.messages[0].content;
        assert!(content.contains("strongly disagree"));
        assert!(content.contains("- strongly agree: 100%"));
        assert!(!content.contains('{'), "{content}");
        let req = b.request(&c, Some(Role::Opponent), EMPTY);
        assert!(req.messages[0].content.contains("Your opinion on the statement is: strongly agree."));
        assert!(req.messages[0].content.contains("last message of Discussant"));
        assert_eq!(req.temperature, 0.7);
    }

    #[test]
    fn missing_api_key() {
        let config = ChatBackendConfig {
            api_key_env: "DEBATENET_TEST_KEY_THAT_IS_NOT_SET".into(),
            ..ChatBackendConfig::default()
        };
        assert!(matches!(
            ChatBackend::from_config(config),
            Err(BackendError::MissingApiKey(_))
        ));
    }

    proptest! {
        #[test]
        fn parsing_is_total(text in ".*") {
            let d = parse_decision(&text);
            let lower = text.to_lowercase();
            if d.is_none() {
                prop_assert!(!decision_regex().is_match(&lower));
            }
        }
    }
}
