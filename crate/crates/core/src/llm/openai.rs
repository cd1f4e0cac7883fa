//! Client for OpenAI-compatible `/chat/completions` endpoints.

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::{ChatProvider, LlmCall, LlmError, ProviderConfig};

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    temperature: f32,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

pub struct OpenAiClient {
    config: ProviderConfig,
    http: reqwest::Client,
    endpoint: String,
    in_flight: Arc<Semaphore>,
}

impl OpenAiClient {
    pub fn new(config: ProviderConfig) -> Result<Self, String> {
        config.validate()?;
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| e.to_string())?;
        let endpoint = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        let in_flight = Arc::new(Semaphore::new(config.max_in_flight));
        Ok(OpenAiClient {
            config,
            http,
            endpoint,
            in_flight,
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    async fn attempt(&self, prompt: &str) -> Result<String, LlmError> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: [Message {
                role: "user",
                content: prompt,
            }],
            temperature: self.config.temperature,
        };
        let mut request = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().await.map_err(|e| self.classify(e))?;
        let status = response.status();
        let text = response.text().await.map_err(|e| self.classify(e))?;
        if status.as_u16() == 429 {
            return Err(LlmError::RateLimited);
        }
        if !status.is_success() {
            return Err(LlmError::Provider {
                status: status.as_u16(),
                body: text,
            });
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| LlmError::Provider {
            status: status.as_u16(),
            body: format!("unreadable completion body ({e}): {text}"),
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Provider {
                status: status.as_u16(),
                body: "completion had no message content".into(),
            })
    }

    fn classify(&self, e: reqwest::Error) -> LlmError {
        if e.is_timeout() {
            LlmError::Timeout(self.config.timeout)
        } else {
            LlmError::Transport(e.to_string())
        }
    }
}

/// Transport failures, 5xx and 429 are retried up to `max_retries` times.
/// Timeouts are not: each call keeps its own deadline.
fn should_retry(e: &LlmError) -> bool {
    match e {
        LlmError::Transport(_) | LlmError::RateLimited => true,
        LlmError::Provider { status, .. } => *status >= 500,
        _ => false,
    }
}

#[async_trait]
impl ChatProvider for OpenAiClient {
    async fn complete(&self, call: &LlmCall) -> Result<String, LlmError> {
        let _permit = self
            .in_flight
            .acquire()
            .await
            .map_err(|_| LlmError::Transport("client is shutting down".into()))?;
        let mut attempt = 0;
        loop {
            match self.attempt(&call.prompt).await {
                Ok(content) => return Ok(content),
                Err(e) if should_retry(&e) && attempt < self.config.max_retries => {
                    attempt += 1;
                    tracing::warn!(error = %e, attempt, "retrying model call");
                    tokio::time::sleep(Duration::from_millis(250 * u64::from(attempt))).await;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
