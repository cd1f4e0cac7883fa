//! One user's pass through the shortlisting flow:
//! dataset, query, factors, analyses, shortlist.

use std::path::Path;

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{load_csv, ColumnType, Dataset, LoadError};
use crate::factor::{
    analyze_factor, analyze_factor_from_rows, AnalysisNotes, EngineError, Factor, FactorAnalysis, FactorId,
    FactorStatus, Importance,
};
use crate::llm::{FactorDraft, Gateway, GatewayError, Selection};
use crate::replay::{Scenario, ScenarioError};
use crate::shortlist::{compute_global_shortlist, GlobalShortlist};

/// Generated factors plus cards spawned by hand.
pub const MAX_SESSION_FACTORS: usize = 8;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no dataset has been loaded")]
    NoDataset,
    #[error("query text is empty")]
    EmptyQuery,
    #[error("unknown factor `{0}`")]
    UnknownFactor(FactorId),
    #[error("a session holds at most {MAX_SESSION_FACTORS} factors")]
    FactorCap,
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Fields a user may edit on a card. Absent fields are left alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorEdit {
    pub title: Option<String>,
    pub source_columns: Option<Vec<String>>,
    pub criteria: Option<String>,
    pub importance: Option<Importance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub rows: usize,
    pub columns: Vec<ColumnSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: ColumnType,
}

impl DatasetSummary {
    pub fn of(d: &Dataset) -> Self {
        DatasetSummary {
            name: d.name().to_string(),
            rows: d.len(),
            columns: d
                .column_types()
                .map(|(name, t)| ColumnSummary {
                    name: name.to_string(),
                    column_type: t,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryOutcome {
    pub factors: Vec<Factor>,
    /// Dropped columns, truncated lists and failed immediate analyses.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub scenario: String,
    pub analyze_immediately: bool,
    dataset: Option<Dataset>,
    query: Option<String>,
    factors: Vec<Factor>,
    shortlist: Option<GlobalShortlist>,
    shortlist_stale: bool,
    /// Bumped on every state change.
    version: u64,
    next_factor: u64,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        Session {
            id: id.into(),
            scenario: Scenario::default().display_name,
            analyze_immediately: false,
            dataset: None,
            query: None,
            factors: Vec::new(),
            shortlist: None,
            shortlist_stale: false,
            version: 0,
            next_factor: 1,
        }
    }

    pub fn dataset(&self) -> Option<&Dataset> {
        self.dataset.as_ref()
    }

    pub fn query(&self) -> Option<&str> {
        self.query.as_deref()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, id: &FactorId) -> Option<&Factor> {
        self.factors.iter().find(|f| &f.id == id)
    }

    pub fn shortlist(&self) -> Option<&GlobalShortlist> {
        self.shortlist.as_ref()
    }

    /// The stored shortlist no longer reflects the current factors.
    pub fn shortlist_stale(&self) -> bool {
        self.shortlist_stale
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    fn touch(&mut self) {
        self.version += 1;
    }

    fn require_dataset(&self) -> Result<&Dataset, SessionError> {
        self.dataset.as_ref().ok_or(SessionError::NoDataset)
    }

    fn index_of(&self, id: &FactorId) -> Result<usize, SessionError> {
        self.factors
            .iter()
            .position(|f| &f.id == id)
            .ok_or_else(|| SessionError::UnknownFactor(id.clone()))
    }

    fn mark_shortlist_stale(&mut self) {
        if self.shortlist.is_some() {
            self.shortlist_stale = true;
        }
    }

    fn fresh_id(&mut self) -> FactorId {
        let id = FactorId::new(format!("f{}", self.next_factor));
        self.next_factor += 1;
        id
    }

    /// Binds a scenario's automation flags. The scenario's provider is the
    /// caller's concern.
    pub fn bind_scenario(&mut self, scenario: &Scenario) {
        self.scenario = scenario.display_name.clone();
        self.analyze_immediately = scenario.analyze_factors_immediately;
        self.touch();
    }

    /// Installs a dataset. Everything downstream of it is discarded.
    pub fn load_dataset(&mut self, d: Dataset) -> DatasetSummary {
        let summary = DatasetSummary::of(&d);
        self.dataset = Some(d);
        self.query = None;
        self.factors.clear();
        self.shortlist = None;
        self.shortlist_stale = false;
        self.touch();
        summary
    }

    pub fn load_csv(&mut self, bytes: &[u8], name: &str) -> Result<DatasetSummary, SessionError> {
        let d = load_csv(bytes, name)?;
        Ok(self.load_dataset(d))
    }

    fn factor_from_draft(&mut self, draft: FactorDraft) -> Factor {
        let id = self.fresh_id();
        Factor::new(id, draft.name, draft.importance)
            .with_sources(draft.source_columns)
            .with_criteria(draft.criteria)
            .with_provocation(draft.risk)
    }

    /// Generates factors for `text`, replacing the current ones. With
    /// `analyze_immediately` set, every runnable factor is analyzed too.
    pub async fn run_query(&mut self, gateway: &Gateway, text: &str) -> Result<QueryOutcome, SessionError> {
        let d = self.require_dataset()?;
        if text.trim().is_empty() {
            return Err(SessionError::EmptyQuery);
        }
        let drafts = gateway.generate_factors(text, d).await?;
        let mut warnings = drafts.warnings;

        self.query = Some(text.trim().to_string());
        self.factors.clear();
        self.shortlist = None;
        self.shortlist_stale = false;
        for draft in drafts.drafts {
            let mut f = self.factor_from_draft(draft);
            if let Some(d) = &self.dataset {
                f.refresh_status(d);
            }
            self.factors.push(f);
        }
        self.touch();

        if self.analyze_immediately {
            warnings.extend(self.analyze_all(gateway).await);
        }
        Ok(QueryOutcome {
            factors: self.factors.clone(),
            warnings,
        })
    }

    /// Analyzes every runnable factor concurrently. Failures are returned
    /// as warnings and leave the factor unanalyzed.
    pub async fn analyze_all(&mut self, gateway: &Gateway) -> Vec<String> {
        let Some(d) = self.dataset.as_ref() else {
            return Vec::new();
        };
        let targets: Vec<&Factor> = self
            .factors
            .iter()
            .filter(|f| f.unrunnable_reason(d).is_none() && !f.criteria.trim().is_empty())
            .collect();
        let plans = join_all(targets.iter().map(|f| gateway.generate_filter_with_fallback(f, d))).await;
        let ids: Vec<FactorId> = targets.iter().map(|f| f.id.clone()).collect();

        let mut warnings = Vec::new();
        for (id, plan) in ids.into_iter().zip(plans) {
            let result = match plan {
                Ok(plan) => self.apply_plan(&id, plan.selection, &plan.notes).map(|_| ()),
                Err(e) => Err(e.into()),
            };
            if let Err(e) = result {
                warnings.push(format!("analysis of {id} failed: {e}"));
            }
        }
        self.touch();
        warnings
    }

    /// Appends a blank card.
    pub fn spawn_factor(&mut self) -> Result<&Factor, SessionError> {
        self.require_dataset()?;
        if self.factors.len() >= MAX_SESSION_FACTORS {
            return Err(SessionError::FactorCap);
        }
        let id = self.fresh_id();
        self.factors.push(Factor::new(id, "", Importance::Medium));
        self.touch();
        Ok(self.factors.last().expect("just pushed"))
    }

    /// Applies `edit` atomically: if any field is rejected nothing changes.
    pub fn edit_factor(&mut self, id: &FactorId, edit: FactorEdit) -> Result<&Factor, SessionError> {
        let idx = self.index_of(id)?;
        let d = self.dataset.as_ref().ok_or(SessionError::NoDataset)?;
        let mut f = self.factors[idx].clone();
        if let Some(cols) = edit.source_columns {
            f.set_source_columns(cols, d)?;
        }
        if let Some(criteria) = edit.criteria {
            f.set_criteria(criteria, d);
        }
        if let Some(title) = edit.title {
            f.title = title;
        }
        let scored_before = self.factors[idx].is_scored();
        if let Some(importance) = edit.importance {
            f.set_importance(importance);
        }
        if f != self.factors[idx] {
            if scored_before || f.is_scored() {
                self.mark_shortlist_stale();
            }
            self.factors[idx] = f;
            self.touch();
        }
        Ok(&self.factors[idx])
    }

    pub fn delete_factor(&mut self, id: &FactorId) -> Result<(), SessionError> {
        let idx = self.index_of(id)?;
        self.factors.remove(idx);
        self.mark_shortlist_stale();
        self.touch();
        Ok(())
    }

    /// Asks the model for the factor's filter and applies it.
    pub async fn analyze(&mut self, gateway: &Gateway, id: &FactorId) -> Result<FactorAnalysis, SessionError> {
        let idx = self.index_of(id)?;
        let d = self.require_dataset()?;
        let f = &self.factors[idx];
        if let Some(reason) = f.unrunnable_reason(d) {
            return Err(EngineError::UnrunnableFactor {
                factor_id: id.clone(),
                reason,
            }
            .into());
        }
        if f.criteria.trim().is_empty() {
            return Err(EngineError::UnrunnableFactor {
                factor_id: id.clone(),
                reason: "criteria are empty".into(),
            }
            .into());
        }
        let plan = gateway.generate_filter_with_fallback(f, d).await?;
        let analysis = self.apply_plan(id, plan.selection, &plan.notes)?;
        self.touch();
        Ok(analysis)
    }

    fn apply_plan(
        &mut self,
        id: &FactorId,
        selection: Selection,
        notes: &AnalysisNotes,
    ) -> Result<FactorAnalysis, SessionError> {
        let idx = self.index_of(id)?;
        let d = self.dataset.as_ref().ok_or(SessionError::NoDataset)?;
        let f = &mut self.factors[idx];
        let analysis = match selection {
            Selection::Filter(expr) => {
                f.filter = Some(expr);
                analyze_factor(f, d, notes)?
            }
            Selection::Rows(rows) => {
                f.filter = None;
                analyze_factor_from_rows(f, d, &rows, notes)?
            }
        };
        debug_assert_eq!(f.status, FactorStatus::Analyzed);
        self.mark_shortlist_stale();
        Ok(analysis)
    }

    /// Re-aggregates the global shortlist from the stored analyses. No
    /// model call is involved.
    pub fn compute_shortlist(&mut self) -> Result<&GlobalShortlist, SessionError> {
        let d = self.require_dataset()?;
        let shortlist = compute_global_shortlist(d, &self.factors)?;
        self.shortlist = Some(shortlist);
        self.shortlist_stale = false;
        self.touch();
        Ok(self.shortlist.as_ref().expect("just stored"))
    }

    pub fn view(&self) -> SessionView<'_> {
        SessionView {
            id: &self.id,
            scenario: &self.scenario,
            version: self.version,
            dataset: self.dataset.as_ref().map(DatasetSummary::of),
            query: self.query.as_deref(),
            factors: &self.factors,
            shortlist: self.shortlist.as_ref(),
            shortlist_stale: self.shortlist_stale,
        }
    }
}

/// Public shape of a session.
#[derive(Debug, Serialize)]
pub struct SessionView<'a> {
    pub id: &'a str,
    pub scenario: &'a str,
    pub version: u64,
    pub dataset: Option<DatasetSummary>,
    pub query: Option<&'a str>,
    pub factors: &'a [Factor],
    pub shortlist: Option<&'a GlobalShortlist>,
    pub shortlist_stale: bool,
}

/// Applies a scenario's automation to a fresh session: binds its flags and
/// loads its dataset, if it names one.
pub fn autostart(scenario: &Scenario, session: &mut Session) -> Result<(), SessionError> {
    scenario.check_files()?;
    session.bind_scenario(scenario);
    if let Some(path) = &scenario.auto_upload_filename {
        let bytes = std::fs::read(path).map_err(|_| ScenarioError::MissingScenarioFile {
            scenario: scenario.display_name.clone(),
            path: path.clone(),
        })?;
        session.load_csv(&bytes, &file_name(path))?;
    }
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset.csv".into())
}
