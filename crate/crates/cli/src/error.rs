use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use provoscope_core::factor::EngineError;
use provoscope_core::llm::{GatewayError, LlmError};
use provoscope_core::replay::ScenarioError;
use provoscope_core::session::SessionError;
use serde::{Deserialize, Serialize};

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub retriable: bool,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                retriable: false,
            },
        }
    }

    fn retriable(mut self, retriable: bool) -> Self {
        self.body.retriable = retriable;
        self
    }

    pub fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("unknown session `{id}`"))
    }

    pub fn unknown_scenario(name: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_scenario", format!("unknown scenario `{name}`"))
    }

    pub fn invalid_body(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<LlmError> for ApiError {
    fn from(e: LlmError) -> Self {
        let retriable = e.is_retriable();
        let (status, code) = match &e {
            LlmError::Timeout(_) => (StatusCode::GATEWAY_TIMEOUT, "timeout"),
            LlmError::Provider { .. } => (StatusCode::BAD_GATEWAY, "provider_error"),
            LlmError::RateLimited => (StatusCode::BAD_GATEWAY, "rate_limited"),
            LlmError::Transport(_) => (StatusCode::BAD_GATEWAY, "transport_error"),
            LlmError::CacheMiss { .. } => (StatusCode::BAD_GATEWAY, "cache_miss"),
            LlmError::NotConfigured => (StatusCode::BAD_GATEWAY, "provider_not_configured"),
            LlmError::Cache(_) => (StatusCode::INTERNAL_SERVER_ERROR, "cache_error"),
        };
        ApiError::new(status, code, e.to_string()).retriable(retriable)
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Llm(inner) => inner.into(),
            GatewayError::EmptyQuery => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_query", e.to_string()),
            GatewayError::EmptyCriteria => ApiError::new(StatusCode::CONFLICT, "unrunnable_factor", e.to_string()),
            GatewayError::NotJson(_) | GatewayError::SchemaError { .. } => {
                ApiError::new(StatusCode::BAD_GATEWAY, "bad_model_response", e.to_string()).retriable(true)
            }
            GatewayError::UnusableAnalysis(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "unusable_analysis", e.to_string()).retriable(true)
            }
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let (status, code) = match &e {
            EngineError::UnrunnableFactor { .. } => (StatusCode::CONFLICT, "unrunnable_factor"),
            EngineError::MissingFilter(_) => (StatusCode::CONFLICT, "missing_filter"),
            EngineError::UnknownColumns(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_columns"),
            EngineError::NoAnalyzedFactors => (StatusCode::CONFLICT, "no_analyzed_factors"),
            EngineError::UnknownWeight(_) => (StatusCode::INTERNAL_SERVER_ERROR, "unknown_weight"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<ScenarioError> for ApiError {
    fn from(e: ScenarioError) -> Self {
        let (status, code) = match &e {
            ScenarioError::Unknown(_) => (StatusCode::NOT_FOUND, "unknown_scenario"),
            ScenarioError::MissingScenarioFile { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "missing_scenario_file"),
            ScenarioError::Unreadable { .. } | ScenarioError::Invalid { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "invalid_scenario")
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::NoDataset => ApiError::new(StatusCode::CONFLICT, "no_dataset", e.to_string()),
            SessionError::EmptyQuery => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_query", e.to_string()),
            SessionError::UnknownFactor(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_factor", e.to_string()),
            SessionError::FactorCap => ApiError::new(StatusCode::CONFLICT, "factor_cap", e.to_string()),
            SessionError::Load(inner) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, inner.code(), inner.to_string()),
            SessionError::Engine(inner) => inner.into(),
            SessionError::Gateway(inner) => inner.into(),
            SessionError::Scenario(inner) => inner.into(),
        }
    }
}
