//! Client for OpenAI-compatible `/v1/completions` endpoints.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CompletionBackend, CompletionRequest, CompletionResult, LlmError, TokenUsage};

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Full URL of the completions route.
    pub url: String,
    pub model: String,
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl EndpointConfig {
    pub fn new(url: &str, model: &str) -> Self {
        EndpointConfig {
            url: url.to_string(),
            model: model.to_string(),
            api_key: None,
            timeout_secs: default_timeout(),
        }
    }

    /// Applies `{PREFIX}_ENDPOINT`, `{PREFIX}_MODEL` and `{PREFIX}_API_KEY`
    /// from the process environment when set.
    pub fn with_env_overrides(mut self, prefix: &str) -> Self {
        if let Ok(url) = std::env::var(format!("{prefix}_ENDPOINT")) {
            self.url = url;
        }
        if let Ok(model) = std::env::var(format!("{prefix}_MODEL")) {
            self.model = model;
        }
        if let Ok(key) = std::env::var(format!("{prefix}_API_KEY")) {
            self.api_key = Some(key);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_jitter: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
            max_jitter: Duration::from_millis(100),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let backoff = self.base_delay * 2u32.saturating_pow(attempt.saturating_sub(1));
        let jitter_ms = self.max_jitter.as_millis() as u64;
        let jitter = if jitter_ms == 0 {
            0
        } else {
            rand::thread_rng().gen_range(0..=jitter_ms)
        };
        backoff + Duration::from_millis(jitter)
    }
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    text: String,
}

#[derive(Debug, Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

fn is_context_overflow(status: u16, body: &str) -> bool {
    (status == 400 || status == 413)
        && (body.contains("context_length_exceeded") || body.contains("maximum context length"))
}

/// Parses a completions response body.
pub(crate) fn parse_response(body: &str) -> Result<CompletionResult, LlmError> {
    let wire: WireResponse =
        serde_json::from_str(body).map_err(|e| LlmError::Decode(e.to_string()))?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::Decode("response has no choices".into()))?;
    let usage = wire
        .usage
        .ok_or_else(|| LlmError::Decode("response has no usage block".into()))?;
    Ok(CompletionResult {
        text: choice.text,
        usage: TokenUsage::new(usage.prompt_tokens, usage.completion_tokens),
    })
}

pub struct HttpBackend {
    config: EndpointConfig,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("url", &self.config.url)
            .field("model", &self.config.model)
            .finish()
    }
}

impl HttpBackend {
    pub fn new(config: EndpointConfig) -> Result<Self, LlmError> {
        Self::with_retry(config, RetryPolicy::default())
    }

    pub fn with_retry(config: EndpointConfig, retry: RetryPolicy) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(HttpBackend {
            config,
            retry,
            client,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn attempt(&self, request: &CompletionRequest, attempt: u32) -> Result<CompletionResult, LlmError> {
        let mut body = json!({
            "model": self.config.model,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        });
        if !request.stop.is_empty() {
            body["stop"] = json!(request.stop);
        }
        let mut builder = self.client.post(&self.config.url).json(&body);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| LlmError::Transport {
            attempts: attempt,
            message: e.to_string(),
        })?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| LlmError::Transport {
            attempts: attempt,
            message: e.to_string(),
        })?;
        if !(200..300).contains(&status) {
            if is_context_overflow(status, &text) {
                return Err(LlmError::ContextOverflow(text));
            }
            return Err(LlmError::Http { status, body: text });
        }
        parse_response(&text)
    }
}

impl CompletionBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        request.validate()?;
        let mut attempt = 1;
        loop {
            match self.attempt(request, attempt) {
                Err(e) if e.is_retryable() && attempt < self.retry.max_attempts => {
                    tracing::warn!(attempt, error = %e, url = %self.config.url, "retrying completion");
                    std::thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_openai_completion_body() {
        let body = r#"{"id":"x","choices":[{"text":" go to kitchen","index":0}],"usage":{"prompt_tokens":12,"completion_tokens":4,"total_tokens":16}}"#;
        let got = parse_response(body).unwrap();
        assert_eq!(got.text, " go to kitchen");
        assert_eq!(got.usage, TokenUsage::new(12, 4));
    }

    #[test]
    fn missing_usage_is_a_decode_error() {
        assert!(matches!(
            parse_response(r#"{"choices":[{"text":"a"}]}"#),
            Err(LlmError::Decode(_))
        ));
        assert!(matches!(parse_response(r#"{"choices":[]}"#), Err(LlmError::Decode(_))));
    }

    #[test]
    fn overflow_detection() {
        assert!(is_context_overflow(400, r#"{"error":{"code":"context_length_exceeded"}}"#));
        assert!(!is_context_overflow(500, "context_length_exceeded"));
        assert!(!is_context_overflow(400, "bad request"));
    }

    #[test]
    fn backoff_grows() {
        let p = RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(10),
            max_jitter: Duration::ZERO,
        };
        assert_eq!(p.delay(1), Duration::from_millis(10));
        assert_eq!(p.delay(2), Duration::from_millis(20));
        assert_eq!(p.delay(3), Duration::from_millis(40));
    }
}
