//! Recording and replaying model calls.
//!
//! [`Interceptor`] sits between the gateway and the live provider. In
//! replay mode it never reaches the provider, so a recorded session can be
//! rerun offline and produces identical output.

pub mod alter;
pub mod cache;
pub mod scenario;

use std::fs::OpenOptions;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;

use crate::llm::{ChatProvider, LlmCall, LlmError};

pub use alter::{apply_alterations, Alteration, AlterationError};
pub use cache::{CacheEntry, CacheError, CacheKey, ResponseCache};
pub use scenario::{load_scenarios, Mode, Scenario, ScenarioError};

/// File in the cache directory that live mode appends to.
pub const LIVE_LOG: &str = "live-calls.jsonl";

pub struct Interceptor {
    scenario: Scenario,
    cache: Option<ResponseCache>,
    live: Option<Arc<dyn ChatProvider>>,
    live_calls: AtomicUsize,
    log_lock: Mutex<()>,
}

impl Interceptor {
    /// Opens the scenario's cache, if any. Record mode needs `live`; replay
    /// mode ignores it.
    pub fn new(scenario: Scenario, live: Option<Arc<dyn ChatProvider>>) -> Result<Self, CacheError> {
        let cache = scenario.cache_dir.as_ref().map(ResponseCache::open).transpose()?;
        Ok(Interceptor {
            scenario,
            cache,
            live,
            live_calls: AtomicUsize::new(0),
            log_lock: Mutex::new(()),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    /// Calls forwarded to the live provider so far.
    pub fn live_calls(&self) -> usize {
        self.live_calls.load(Ordering::SeqCst)
    }

    async fn forward(&self, call: &LlmCall) -> Result<String, LlmError> {
        let live = self.live.as_ref().ok_or(LlmError::NotConfigured)?;
        self.live_calls.fetch_add(1, Ordering::SeqCst);
        live.complete(call).await
    }

    fn replay(&self, call: &LlmCall) -> Result<String, LlmError> {
        let key = CacheKey::for_call(call);
        let cache = self.cache.as_ref().ok_or_else(|| LlmError::CacheMiss { key: key.to_string() })?;
        let entry = cache
            .get(&key)
            .map_err(|e| LlmError::Cache(e.to_string()))?
            .ok_or_else(|| LlmError::CacheMiss { key: key.to_string() })?;
        apply_alterations(&self.scenario.alterations, &entry).map_err(|e| LlmError::Cache(e.to_string()))
    }

    fn log_live(&self, entry: &CacheEntry) {
        let Some(cache) = &self.cache else { return };
        let _guard = self.log_lock.lock().unwrap_or_else(|p| p.into_inner());
        let line = serde_json::to_string(entry).expect("CacheEntry serializes");
        let result = OpenOptions::new()
            .create(true)
            .append(true)
            .open(cache.dir().join(LIVE_LOG))
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = result {
            tracing::warn!(error = %e, "could not append to the live call log");
        }
    }
}

#[async_trait]
impl ChatProvider for Interceptor {
    async fn complete(&self, call: &LlmCall) -> Result<String, LlmError> {
        match self.scenario.mode {
            Mode::Replay => self.replay(call),
            Mode::Record => {
                let response = self.forward(call).await?;
                let entry = CacheEntry::new(call, response);
                if let Some(cache) = &self.cache {
                    cache.put(&entry).map_err(|e| LlmError::Cache(e.to_string()))?;
                }
                Ok(entry.response)
            }
            Mode::Live => {
                let response = self.forward(call).await?;
                let entry = CacheEntry::new(call, response);
                tracing::debug!(key = %entry.key, kind = ?call.kind, "live model call");
                self.log_live(&entry);
                Ok(entry.response)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::llm::CallKind;

    struct Echo;

    #[async_trait]
    impl ChatProvider for Echo {
        async fn complete(&self, call: &LlmCall) -> Result<String, LlmError> {
            Ok(format!("{{\"message\": \"echo {}\"}}", call.prompt))
        }
    }

    fn call(prompt: &str) -> LlmCall {
        let d = Dataset::from_records("t", ["a"], [["1"]]).unwrap();
        LlmCall {
            kind: CallKind::Analysis,
            template_version: "v".into(),
            model: "m".into(),
            dataset: d.fingerprint(),
            prompt: prompt.into(),
        }
    }

    fn scenario(mode: Mode, dir: &std::path::Path) -> Scenario {
        Scenario {
            display_name: "t".into(),
            mode,
            cache_dir: Some(dir.to_path_buf()),
            ..Default::default()
        }
    }

    #[tokio::test]
    async fn record_then_replay_offline() {
        let dir = tempfile::tempdir().unwrap();
        let rec = Interceptor::new(scenario(Mode::Record, dir.path()), Some(Arc::new(Echo))).unwrap();
        let recorded = rec.complete(&call("p")).await.unwrap();
        assert_eq!(rec.live_calls(), 1);

        let rep = Interceptor::new(scenario(Mode::Replay, dir.path()), Some(Arc::new(Echo))).unwrap();
        assert_eq!(rep.complete(&call("p")).await.unwrap(), recorded);
        assert!(matches!(rep.complete(&call("q")).await, Err(LlmError::CacheMiss { .. })));
        assert_eq!(rep.live_calls(), 0);
    }

    #[tokio::test]
    async fn replay_applies_alterations() {
        let dir = tempfile::tempdir().unwrap();
        let rec = Interceptor::new(scenario(Mode::Record, dir.path()), Some(Arc::new(Echo))).unwrap();
        rec.complete(&call("p")).await.unwrap();

        let mut s = scenario(Mode::Replay, dir.path());
        s.alterations.push(Alteration {
            matcher: "\"prompt\": \"p\"".into(),
            kind: None,
            field_path: "message".into(),
            replacement: "changed".into(),
        });
        let rep = Interceptor::new(s.clone(), None).unwrap();
        assert_eq!(rep.complete(&call("p")).await.unwrap(), "{\"message\": \"changed\"}");

        s.alterations[0].field_path = "absent".into();
        let rep = Interceptor::new(s, None).unwrap();
        let err = rep.complete(&call("p")).await.unwrap_err();
        assert!(err.to_string().contains("not found"), "{err}");
    }

    #[tokio::test]
    async fn live_logs_and_record_requires_provider() {
        let dir = tempfile::tempdir().unwrap();
        let live = Interceptor::new(scenario(Mode::Live, dir.path()), Some(Arc::new(Echo))).unwrap();
        live.complete(&call("a")).await.unwrap();
        live.complete(&call("b")).await.unwrap();
        let log = std::fs::read_to_string(dir.path().join(LIVE_LOG)).unwrap();
        assert_eq!(log.lines().count(), 2);
        assert!(live.cache().unwrap().keys().unwrap().is_empty());

        let rec = Interceptor::new(scenario(Mode::Record, dir.path()), None).unwrap();
        assert_eq!(rec.complete(&call("a")).await, Err(LlmError::NotConfigured));
    }
}
