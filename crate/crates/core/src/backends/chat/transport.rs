use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ChatRequest;
use crate::backends::BackendError;

/// A failed exchange. Retryable failures are timeouts, connection errors,
/// rate limiting and server errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError {
    pub retryable: bool,
    pub message: String,
}

impl TransportError {
    pub fn retryable(message: impl Into<String>) -> Self {
        TransportError {
            retryable: true,
            message: message.into(),
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        TransportError {
            retryable: false,
            message: message.into(),
        }
    }
}

/// Sends one chat-completions request and returns the raw response body.
pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Blocking HTTP transport with bearer-token authentication.
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: String,
}

impl HttpTransport {
    /// Reads the API key from the environment variable `api_key_env`.
    pub fn from_env(endpoint: &str, api_key_env: &str, timeout: Duration) -> Result<Self, BackendError> {
        let api_key =
            std::env::var(api_key_env).map_err(|_| BackendError::MissingApiKey(api_key_env.to_string()))?;
        Ok(Self::new(endpoint, api_key, timeout))
    }

    pub fn new(endpoint: &str, api_key: String, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        HttpTransport {
            agent: ureq::Agent::new_with_config(config),
            endpoint: endpoint.to_string(),
            api_key,
        }
    }
}

impl ChatTransport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(request)
            .map_err(|e| TransportError::retryable(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::retryable(e.to_string()))?;
        match status {
            200..=299 => Ok(body),
            429 | 500..=599 => Err(TransportError::retryable(format!("HTTP {status}: {body}"))),
            _ => Err(TransportError::fatal(format!("HTTP {status}: {body}"))),
        }
    }
}

/// One recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: ChatRequest,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub exchanges: Vec<Exchange>,
}

impl Fixture {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path).map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), BackendError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| BackendError::Fixture(e.to_string()))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))
    }
}

/// Serves recorded responses in order, checking that each request matches
/// the recorded one.
pub struct ReplayTransport {
    fixture: Fixture,
    cursor: Mutex<usize>,
}

impl ReplayTransport {
    pub fn new(fixture: Fixture) -> Self {
        ReplayTransport {
            fixture,
            cursor: Mutex::new(0),
        }
    }

    pub fn remaining(&self) -> usize {
        self.fixture.exchanges.len() - *self.cursor.lock().unwrap()
    }
}

impl ChatTransport for ReplayTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut cursor = self.cursor.lock().unwrap();
        let exchange = self
            .fixture
            .exchanges
            .get(*cursor)
            .ok_or_else(|| TransportError::fatal(format!("fixture exhausted after {} exchanges", *cursor)))?;
        if &exchange.request != request {
            return Err(TransportError::fatal(format!(
                "request {} differs from the recording",
                *cursor
            )));
        }
        *cursor += 1;
        Ok(exchange.response.clone())
    }
}

/// Forwards to an inner transport and keeps every successful exchange.
pub struct RecordingTransport<T> {
    inner: T,
    log: Mutex<Vec<Exchange>>,
}

impl<T: ChatTransport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn fixture(&self) -> Fixture {
        Fixture {
            exchanges: self.log.lock().unwrap().clone(),
        }
    }
}

impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let response = self.inner.send(request)?;
        self.log.lock().unwrap().push(Exchange {
            request: request.clone(),
            response: response.clone(),
        });
        Ok(response)
    }
}
