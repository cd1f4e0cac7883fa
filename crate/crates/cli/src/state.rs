use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex as StdMutex};

use provoscope_core::llm::{ChatProvider, Gateway};
use provoscope_core::replay::{load_scenarios, Interceptor, Scenario};
use provoscope_core::session::{autostart, Session};
use tokio::sync::{Mutex, RwLock};

use crate::error::ApiError;

/// Server configuration assembled by the binary or by tests.
#[derive(Clone, Default)]
pub struct AppConfig {
    /// Directory of `*.toml` scenario manifests.
    pub scenario_dir: Option<PathBuf>,
    /// Extra scenarios, e.g. one assembled from command-line flags.
    pub extra_scenarios: Vec<Scenario>,
    /// Scenario bound to new sessions. Falls back to "default".
    pub default_scenario: Option<String>,
    pub model: String,
    /// Provider used by live and record modes.
    pub live: Option<Arc<dyn ChatProvider>>,
    /// Where session snapshots are written, one JSON file per session.
    pub persist_dir: Option<PathBuf>,
    /// Static UI bundle served at `/`.
    pub ui_dir: Option<PathBuf>,
}

pub type SessionHandle = Arc<Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    scenarios: Vec<Scenario>,
    default_scenario: String,
    model: String,
    live: Option<Arc<dyn ChatProvider>>,
    interceptors: StdMutex<HashMap<String, Arc<Interceptor>>>,
    sessions: RwLock<HashMap<String, SessionHandle>>,
    persist_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(config: AppConfig) -> anyhow::Result<Self> {
        let mut scenarios = match &config.scenario_dir {
            Some(dir) => load_scenarios(dir)?,
            None => vec![Scenario::default()],
        };
        for extra in config.extra_scenarios {
            scenarios.retain(|s| s.display_name != extra.display_name);
            scenarios.push(extra);
        }
        let default_scenario = config.default_scenario.unwrap_or_else(|| Scenario::default().display_name);
        if !scenarios.iter().any(|s| s.display_name == default_scenario) {
            anyhow::bail!("unknown scenario `{default_scenario}`");
        }

        let mut sessions = HashMap::new();
        if let Some(dir) = &config.persist_dir {
            std::fs::create_dir_all(dir)?;
            for s in load_snapshots(dir)? {
                sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(AppState {
            inner: Arc::new(Inner {
                scenarios,
                default_scenario,
                model: config.model,
                live: config.live,
                interceptors: StdMutex::default(),
                sessions: RwLock::new(sessions),
                persist_dir: config.persist_dir,
            }),
        })
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.inner.scenarios
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.inner.scenarios.iter().find(|s| s.display_name == name)
    }

    /// The interceptor for a scenario, created on first use so that live
    /// call counts and the cache handle are shared by all its sessions.
    pub fn interceptor(&self, name: &str) -> Result<Arc<Interceptor>, ApiError> {
        let scenario = self.scenario(name).ok_or_else(|| ApiError::unknown_scenario(name))?;
        let mut map = self.inner.interceptors.lock().expect("interceptor map poisoned");
        if let Some(i) = map.get(name) {
            return Ok(i.clone());
        }
        let i = Interceptor::new(scenario.clone(), self.inner.live.clone()).map_err(|e| {
            ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, "cache_error", e.to_string())
        })?;
        let i = Arc::new(i);
        map.insert(name.to_string(), i.clone());
        Ok(i)
    }

    pub fn gateway(&self, scenario: &str) -> Result<Gateway, ApiError> {
        Ok(Gateway::new(self.interceptor(scenario)?, self.inner.model.clone()))
    }

    /// Creates a session bound to the default scenario, with its autostart
    /// applied.
    pub async fn create_session(&self) -> Result<SessionHandle, ApiError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let mut session = Session::new(id.clone());
        let scenario = self.scenario(&self.inner.default_scenario).expect("checked at startup");
        autostart(scenario, &mut session)?;
        self.persist(&session);
        let handle = Arc::new(Mutex::new(session));
        self.inner.sessions.write().await.insert(id, handle.clone());
        Ok(handle)
    }

    pub async fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        self.inner
            .sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    /// Writes a snapshot when persistence is on. Failures are logged, not
    /// surfaced: the in-memory session stays authoritative.
    pub fn persist(&self, session: &Session) {
        let Some(dir) = &self.inner.persist_dir else {
            return;
        };
        if let Err(e) = write_snapshot(dir, session) {
            tracing::warn!(session = %session.id, error = %e, "cannot persist session");
        }
    }
}

fn write_snapshot(dir: &Path, session: &Session) -> std::io::Result<()> {
    let body = serde_json::to_vec(session)?;
    let tmp = dir.join(format!(".{}.json.tmp", session.id));
    std::fs::write(&tmp, body)?;
    std::fs::rename(&tmp, dir.join(format!("{}.json", session.id)))
}

fn load_snapshots(dir: &Path) -> anyhow::Result<Vec<Session>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let is_snapshot = path.extension().is_some_and(|e| e == "json")
            && !path.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'));
        if !is_snapshot {
            continue;
        }
        match serde_json::from_slice::<Session>(&std::fs::read(&path)?) {
            Ok(s) => out.push(s),
            Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping unreadable session snapshot"),
        }
    }
    Ok(out)
}
