//! REST service over shortlisting sessions, plus helpers shared with the
//! `provoscope` binary.

pub mod error;
pub mod routes;
pub mod state;

use std::sync::Arc;

use provoscope_core::llm::{ChatProvider, OpenAiClient, ProviderConfig};

pub use error::{ApiError, ErrorBody};
pub use routes::{router, VERSION_HEADER};
pub use state::{AppConfig, AppState};

/// Builds the shared state and the router for `config`.
pub fn app(config: AppConfig) -> anyhow::Result<(AppState, axum::Router)> {
    let ui_dir = config.ui_dir.clone();
    let state = AppState::new(config)?;
    let router = router(state.clone(), ui_dir.as_deref());
    Ok((state, router))
}

/// An OpenAI-compatible client keyed from the environment.
pub fn live_provider(base_url: &str, model: &str) -> anyhow::Result<Arc<dyn ChatProvider>> {
    let config = ProviderConfig::new(base_url, model).with_env_key();
    config.validate().map_err(anyhow::Error::msg)?;
    Ok(Arc::new(OpenAiClient::new(config).map_err(anyhow::Error::msg)?))
}
