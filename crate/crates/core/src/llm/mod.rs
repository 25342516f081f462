//! Completion backends and token/dollar accounting.
//!
//! Every model call goes through [`CompletionBackend::complete`]. A
//! [`RoleClient`] binds a backend to a billing [`Role`] and records the
//! backend-reported usage into a shared [`CostLedger`].

mod ledger;
mod replay;
#[cfg(feature = "http")]
mod http;

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ledger::{
    ledger_expense, raw_expense, Cents, CostLedger, Expense, LedgerEvent, LedgerSnapshot,
    PriceTable, Role, TokenUsage, DEFAULT_STRONG_PRICE_PER_1K,
};
pub use replay::{fingerprint, RecordingBackend, ReplayBackend, ReplayTranscript, TranscriptEntry};
#[cfg(feature = "http")]
pub use http::{EndpointConfig, HttpBackend, RetryPolicy};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("prompt exceeds the model context window: {0}")]
    ContextOverflow(String),
    #[error("malformed endpoint response: {0}")]
    Decode(String),
    #[error("replay mismatch at call {index}: expected prompt fingerprint {expected}, got {actual}")]
    ReplayMismatch {
        index: usize,
        expected: String,
        actual: String,
    },
    #[error("replay transcript exhausted at call {index}")]
    ReplayExhausted { index: usize },
    #[error("replay backend used concurrently")]
    ConcurrentReplay,
    #[error("transcript: {0}")]
    Transcript(String),
    #[error("scripted backend ran out of responses after {0} call(s)")]
    ScriptExhausted(usize),
}

impl LlmError {
    /// Whether a bounded retry could plausibly succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            LlmError::Transport { .. } => true,
            LlmError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f32,
    pub stop: Vec<String>,
}

impl CompletionRequest {
    /// Greedy decoding with no stop sequences.
    pub fn new(prompt: impl Into<String>, max_tokens: u32) -> Result<Self, LlmError> {
        let req = CompletionRequest {
            prompt: prompt.into(),
            max_tokens,
            temperature: 0.0,
            stop: Vec::new(),
        };
        req.validate()?;
        Ok(req)
    }

    pub fn with_stop(mut self, stop: &[&str]) -> Self {
        self.stop = stop.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("prompt is empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be >= 1".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(LlmError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub usage: TokenUsage,
}

/// A text-completion model. Implementations must be shareable across
/// concurrently running episodes (replay backends refuse concurrent use).
pub trait CompletionBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        (**self).complete(request)
    }
}

/// `ceil(chars / 4)`. Only for pre-flight budget checks; accounting always
/// uses backend-reported usage.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

fn estimated_usage(prompt: &str, completion: &str) -> TokenUsage {
    TokenUsage::new(estimate_tokens(prompt), estimate_tokens(completion))
}

/// A backend driven by a closure over the prompt. Usage is estimated.
pub struct FnBackend<F> {
    name: String,
    f: F,
}

impl<F> FnBackend<F>
where
    F: Fn(&str) -> String + Send + Sync,
{
    pub fn new(name: &str, f: F) -> Self {
        FnBackend {
            name: name.to_string(),
            f,
        }
    }
}

impl<F> CompletionBackend for FnBackend<F>
where
    F: Fn(&str) -> String + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let text = (self.f)(&request.prompt);
        let usage = estimated_usage(&request.prompt, &text);
        Ok(CompletionResult { text, usage })
    }
}

/// Returns canned completions in order regardless of the prompt.
#[derive(Debug)]
pub struct ScriptedBackend {
    responses: Vec<String>,
    repeat_last: bool,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    /// Fails once the script is exhausted.
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedBackend {
            responses: responses.into_iter().map(Into::into).collect(),
            repeat_last: false,
            cursor: Mutex::new(0),
        }
    }

    /// Keeps answering with the final response once the script is exhausted.
    pub fn repeating<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedBackend {
            repeat_last: true,
            ..Self::new(responses)
        }
    }

    pub fn calls(&self) -> usize {
        *self.cursor.lock().expect("script cursor poisoned")
    }
}

impl CompletionBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let mut cursor = self.cursor.lock().expect("script cursor poisoned");
        let text = match self.responses.get(*cursor) {
            Some(t) => t.clone(),
            None if self.repeat_last && !self.responses.is_empty() => {
                self.responses.last().cloned().unwrap_or_default()
            }
            None => return Err(LlmError::ScriptExhausted(*cursor)),
        };
        *cursor += 1;
        let usage = estimated_usage(&request.prompt, &text);
        Ok(CompletionResult { text, usage })
    }
}

/// A backend bound to a billing role and a ledger.
#[derive(Clone)]
pub struct RoleClient {
    backend: Arc<dyn CompletionBackend>,
    role: Role,
    ledger: Arc<CostLedger>,
}

impl std::fmt::Debug for RoleClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RoleClient")
            .field("backend", &self.backend.name())
            .field("role", &self.role)
            .finish()
    }
}

impl RoleClient {
    pub fn new(backend: Arc<dyn CompletionBackend>, role: Role, ledger: Arc<CostLedger>) -> Self {
        RoleClient {
            backend,
            role,
            ledger,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn ledger(&self) -> &Arc<CostLedger> {
        &self.ledger
    }

    pub fn backend(&self) -> &Arc<dyn CompletionBackend> {
        &self.backend
    }

    /// Calls the backend and records the reported usage under this client's role.
    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        request.validate()?;
        let result = self.backend.complete(request)?;
        self.ledger.record(self.role, result.usage);
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_tokens_is_ceiling_of_quarter_chars() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcdefgh"), 2);
        assert_eq!(estimate_tokens("abcdefghi"), 3);
    }

    #[test]
    fn request_validation() {
        assert!(CompletionRequest::new("", 4).is_err());
        assert!(CompletionRequest::new("x", 0).is_err());
        let mut r = CompletionRequest::new("x", 1).unwrap();
        r.temperature = -1.0;
        assert!(r.validate().is_err());
    }

    #[test]
    fn role_client_records_usage_without_touching_request() {
        let ledger = Arc::new(CostLedger::new(PriceTable::default()));
        let backend: Arc<dyn CompletionBackend> = Arc::new(ScriptedBackend::new(["look around"]));
        let client = RoleClient::new(backend, Role::WeakExplore, ledger.clone());
        let req = CompletionRequest::new("a prompt!", 8).unwrap();
        let before = req.clone();
        let out = client.complete(&req).unwrap();
        assert_eq!(req, before);
        assert_eq!(out.text, "look around");
        assert_eq!(ledger.usage(Role::WeakExplore), TokenUsage::new(3, 3));
        assert_eq!(ledger.usage(Role::StrongExploit), TokenUsage::default());
    }

    #[test]
    fn scripted_exhaustion_and_repeat() {
        let b = ScriptedBackend::new(["a"]);
        let req = CompletionRequest::new("p", 1).unwrap();
        assert_eq!(b.complete(&req).unwrap().text, "a");
        assert!(matches!(b.complete(&req), Err(LlmError::ScriptExhausted(1))));
        let r = ScriptedBackend::repeating(["a", "b"]);
        let texts: Vec<_> = (0..4).map(|_| r.complete(&req).unwrap().text).collect();
        assert_eq!(texts, ["a", "b", "b", "b"]);
    }

    #[test]
    fn retryability() {
        assert!(LlmError::Transport { attempts: 1, message: "x".into() }.is_retryable());
        assert!(LlmError::Http { status: 503, body: String::new() }.is_retryable());
        assert!(LlmError::Http { status: 429, body: String::new() }.is_retryable());
        assert!(!LlmError::Http { status: 400, body: String::new() }.is_retryable());
        assert!(!LlmError::ContextOverflow(String::new()).is_retryable());
    }
}
