use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::alter::{validate_path, Alteration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Calls go to the provider and are logged.
    #[default]
    Live,
    /// Calls go to the provider and responses are stored in the cache.
    Record,
    /// Calls are answered from the cache only.
    Replay,
}

/// A named preset: how model calls are served, plus optional autostart
/// behaviour for demos and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub display_name: String,
    #[serde(default)]
    pub mode: Mode,
    /// Dataset loaded into a new session on activation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_upload_filename: Option<PathBuf>,
    #[serde(default)]
    pub analyze_factors_immediately: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alterations: Vec<Alteration>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario manifest {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error("invalid scenario manifest {path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("scenario `{scenario}` names a file that does not exist: {path}")]
    MissingScenarioFile { scenario: String, path: PathBuf },
    #[error("unknown scenario `{0}`")]
    Unknown(String),
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            display_name: "default".into(),
            mode: Mode::Live,
            auto_upload_filename: None,
            analyze_factors_immediately: false,
            cache_dir: None,
            alterations: Vec::new(),
        }
    }
}

impl Scenario {
    /// Parses a TOML manifest. Relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path, origin: &Path) -> Result<Self, ScenarioError> {
        let invalid = |message: String| ScenarioError::Invalid {
            path: origin.to_path_buf(),
            message,
        };
        let mut s: Scenario = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        if s.display_name.trim().is_empty() {
            return Err(invalid("display_name is empty".into()));
        }
        for alt in &s.alterations {
            validate_path(&alt.field_path).map_err(|e| invalid(e.to_string()))?;
            if alt.matcher.is_empty() {
                return Err(invalid("an alteration has an empty `match`".into()));
            }
        }
        if s.mode != Mode::Live && s.cache_dir.is_none() {
            return Err(invalid(format!("{:?} mode needs a cache_dir", s.mode).to_lowercase()));
        }
        for p in [&mut s.auto_upload_filename, &mut s.cache_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|e| ScenarioError::Unreadable {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Scenario::from_toml(&text, base, path)
    }

    /// Checks that every file the scenario relies on exists.
    pub fn check_files(&self) -> Result<(), ScenarioError> {
        let missing = |path: &Path| ScenarioError::MissingScenarioFile {
            scenario: self.display_name.clone(),
            path: path.to_path_buf(),
        };
        if let Some(p) = &self.auto_upload_filename {
            if !p.is_file() {
                return Err(missing(p));
            }
        }
        if self.mode == Mode::Replay {
            if let Some(dir) = &self.cache_dir {
                if !dir.is_dir() {
                    return Err(missing(dir));
                }
            }
        }
        Ok(())
    }
}

/// Loads every `*.toml` manifest under `dir` (one level of subdirectories
/// included), plus the built-in default. Sorted by display name, with the
/// default first.
pub fn load_scenarios(dir: &Path) -> Result<Vec<Scenario>, ScenarioError> {
    let mut manifests = Vec::new();
    let unreadable = |path: &Path, e: std::io::Error| ScenarioError::Unreadable {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    for entry in fs::read_dir(dir).map_err(|e| unreadable(dir, e))? {
        let path = entry.map_err(|e| unreadable(dir, e))?.path();
        if path.is_dir() {
            for inner in fs::read_dir(&path).map_err(|e| unreadable(&path, e))? {
                let inner = inner.map_err(|e| unreadable(&path, e))?.path();
                if inner.extension().is_some_and(|e| e == "toml") {
                    manifests.push(inner);
                }
            }
        } else if path.extension().is_some_and(|e| e == "toml") {
            manifests.push(path);
        }
    }
    let mut scenarios = manifests.iter().map(|p| Scenario::load(p)).collect::<Result<Vec<_>, _>>()?;
    scenarios.sort_by(|a, b| a.display_name.cmp(&b.display_name));
    scenarios.retain(|s| s.display_name != "default");
    scenarios.insert(0, Scenario::default());
    Ok(scenarios)
}
