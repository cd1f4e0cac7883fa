//! Prompting the model for factors and factor analyses.
//!
//! The gateway is stateless. Everything it sends goes through a
//! [`ChatProvider`], which is either the HTTP client in [`openai`] or a
//! wrapper from [`crate::replay`] that records or replays responses.

mod gateway;
pub mod openai;
pub mod prompt;
pub mod response;

use std::fmt;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Digest;

pub use gateway::{AnalysisPlan, Gateway, ProvocationMode, Selection};
pub use openai::OpenAiClient;
pub use prompt::{build_analysis_prompt, build_factor_prompt, TEMPLATE_VERSION};
pub use response::{parse_analysis_response, parse_factor_response, AnalysisResponse, FactorDraft, FactorDrafts};

/// Environment variable holding the provider API key.
pub const API_KEY_ENV: &str = "PROVOSCOPE_API_KEY";

/// What a model call is for. Part of the cache key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    FactorGeneration,
    Provocation,
    Analysis,
    AnalysisRetry,
}

/// One prompt bound for the model, with the context needed to key a cache.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmCall {
    pub kind: CallKind,
    pub template_version: String,
    pub model: String,
    pub dataset: Digest,
    pub prompt: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("model call timed out after {0:?}")]
    Timeout(Duration),
    #[error("provider returned HTTP {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("provider rate limit exceeded")]
    RateLimited,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no cached response for key {key}")]
    CacheMiss { key: String },
    #[error("no live model provider is configured")]
    NotConfigured,
    #[error("response cache error: {0}")]
    Cache(String),
}

impl LlmError {
    /// Whether the same call could succeed if repeated later.
    pub fn is_retriable(&self) -> bool {
        matches!(
            self,
            LlmError::Timeout(_) | LlmError::RateLimited | LlmError::Transport(_)
        ) || matches!(self, LlmError::Provider { status, .. } if *status >= 500)
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("query is empty")]
    EmptyQuery,
    #[error("factor criteria are empty")]
    EmptyCriteria,
    #[error("response is not JSON: {0}")]
    NotJson(String),
    #[error("response schema error: {}", match .index { Some(i) => format!("factor {}: field {:?}", i + 1, .field), None => format!("field {:?}", .field) })]
    SchemaError { field: String, index: Option<usize> },
    #[error("model produced no usable filter or row list: {0}")]
    UnusableAnalysis(String),
}

#[async_trait]
pub trait ChatProvider: Send + Sync {
    async fn complete(&self, call: &LlmCall) -> Result<String, LlmError>;
}

#[derive(Clone, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub temperature: f32,
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_in_flight: usize,
}

impl fmt::Debug for ProviderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProviderConfig")
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("temperature", &self.temperature)
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .field("max_in_flight", &self.max_in_flight)
            .finish()
    }
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            base_url: "http://localhost:11434/v1".into(),
            model: "gpt-4o-mini".into(),
            api_key: None,
            temperature: 0.0,
            timeout: Duration::from_secs(90),
            max_retries: 1,
            max_in_flight: 4,
        }
    }
}

impl ProviderConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        ProviderConfig {
            base_url: base_url.into(),
            model: model.into(),
            ..Default::default()
        }
    }

    /// Reads the API key from [`API_KEY_ENV`].
    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.timeout.is_zero() {
            return Err("timeout must be positive".into());
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        reqwest::Url::parse(&self.base_url).map_err(|e| format!("invalid base_url: {e}"))?;
        Ok(())
    }
}
