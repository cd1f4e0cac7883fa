//! Factors: one shortlisting criterion each, plus their factor-local analysis.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::dataset::{Dataset, RowId};
use crate::filter::{matching_rows, validate_columns, FilterExpr};
use crate::profile::{profile_column, ColumnProfile};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("factor {factor_id} cannot be applied: {reason}")]
    UnrunnableFactor { factor_id: FactorId, reason: String },
    #[error("factor {0} has no filter to apply")]
    MissingFilter(FactorId),
    #[error("unknown columns: {}", .0.join(", "))]
    UnknownColumns(Vec<String>),
    #[error("no analyzed factors to rank by")]
    NoAnalyzedFactors,
    #[error("weight {0} has no highlight shade")]
    UnknownWeight(Weight),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactorId(String);

impl FactorId {
    pub fn new(id: impl Into<String>) -> Self {
        FactorId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered so that `High > Medium > Low`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Importance {
    Low,
    Medium,
    High,
}

impl Importance {
    pub const ALL: [Importance; 3] = [Importance::High, Importance::Medium, Importance::Low];

    pub fn weight(self) -> Weight {
        importance_weight(self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Importance::High => "High",
            Importance::Medium => "Medium",
            Importance::Low => "Low",
        }
    }
}

impl std::str::FromStr for Importance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" => Ok(Importance::High),
            "medium" => Ok(Importance::Medium),
            "low" => Ok(Importance::Low),
            other => Err(format!("unknown importance {other:?}")),
        }
    }
}

/// A factor weight or row score, stored exactly as integer hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Weight(u32);

impl Weight {
    pub const ZERO: Weight = Weight(0);

    pub const fn from_hundredths(h: u32) -> Self {
        Weight(h)
    }

    pub const fn hundredths(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl std::ops::Add for Weight {
    type Output = Weight;

    fn add(self, rhs: Weight) -> Weight {
        Weight(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for Weight {
    fn add_assign(&mut self, rhs: Weight) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Weight {
    fn sum<I: Iterator<Item = Weight>>(iter: I) -> Weight {
        iter.fold(Weight::ZERO, |a, b| a + b)
    }
}

/// Renders `1.0`, `0.66`, `0.33`, `1.66`, `0.0`.
impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (whole, frac) = (self.0 / 100, self.0 % 100);
        if frac % 10 == 0 {
            write!(f, "{whole}.{}", frac / 10)
        } else {
            write!(f, "{whole}.{frac:02}")
        }
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(serde::de::Error::custom("weight must be a non-negative number"));
        }
        Ok(Weight((v * 100.0).round() as u32))
    }
}

/// High → 1.0, Medium → 0.66, Low → 0.33.
pub fn importance_weight(i: Importance) -> Weight {
    match i {
        Importance::High => Weight(100),
        Importance::Medium => Weight(66),
        Importance::Low => Weight(33),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FactorStatus {
    Draft,
    Analyzed,
    Unrunnable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub id: FactorId,
    pub title: String,
    pub source_columns: Vec<String>,
    pub criteria: String,
    /// Critique of the factor produced alongside it.
    pub provocation: String,
    /// Set once the criteria are edited; the provocation was written for the
    /// original criteria.
    #[serde(default)]
    pub provocation_stale: bool,
    pub importance: Importance,
    pub filter: Option<FilterExpr>,
    pub status: FactorStatus,
    pub analysis: Option<FactorAnalysis>,
    /// An analysis exists but predates the latest criteria/source edit.
    #[serde(default)]
    pub analysis_stale: bool,
}

impl Factor {
    pub fn new(id: FactorId, title: impl Into<String>, importance: Importance) -> Self {
        Factor {
            id,
            title: title.into(),
            source_columns: Vec::new(),
            criteria: String::new(),
            provocation: String::new(),
            provocation_stale: false,
            importance,
            filter: None,
            status: FactorStatus::Unrunnable,
            analysis: None,
            analysis_stale: false,
        }
    }

    pub fn with_sources<I, S>(mut self, columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.source_columns = columns.into_iter().map(Into::into).collect();
        self.status = self.baseline_status(None);
        self
    }

    pub fn with_criteria(mut self, criteria: impl Into<String>) -> Self {
        self.criteria = criteria.into();
        self
    }

    pub fn with_provocation(mut self, provocation: impl Into<String>) -> Self {
        self.provocation = provocation.into();
        self
    }

    pub fn with_filter(mut self, filter: FilterExpr) -> Self {
        self.filter = Some(filter);
        self
    }

    pub fn weight(&self) -> Weight {
        importance_weight(self.importance)
    }

    /// Title for display; blank titles render as `(untitled)`.
    pub fn display_title(&self) -> &str {
        if self.title.trim().is_empty() {
            "(untitled)"
        } else {
            &self.title
        }
    }

    /// Why the factor cannot be applied against `d`, if it cannot.
    pub fn unrunnable_reason(&self, d: &Dataset) -> Option<String> {
        if self.source_columns.is_empty() {
            return Some("no source columns selected".into());
        }
        let unknown: Vec<&str> = self
            .source_columns
            .iter()
            .filter(|c| !d.has_column(c))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            return Some(format!("unknown source columns: {}", unknown.join(", ")));
        }
        if let Some(filter) = &self.filter {
            let unknown = validate_columns(filter, d);
            if !unknown.is_empty() {
                return Some(format!("filter references unknown columns: {}", unknown.join(", ")));
            }
        }
        None
    }

    fn baseline_status(&self, d: Option<&Dataset>) -> FactorStatus {
        let unrunnable = match d {
            Some(d) => self.unrunnable_reason(d).is_some(),
            None => self.source_columns.is_empty(),
        };
        if unrunnable {
            FactorStatus::Unrunnable
        } else if self.analysis.is_some() && !self.analysis_stale {
            FactorStatus::Analyzed
        } else {
            FactorStatus::Draft
        }
    }

    /// Recomputes `status` from the factor's contents.
    pub fn refresh_status(&mut self, d: &Dataset) {
        self.status = self.baseline_status(Some(d));
    }

    /// Replaces the criteria text. Any existing analysis becomes stale.
    pub fn set_criteria(&mut self, criteria: impl Into<String>, d: &Dataset) {
        let criteria = criteria.into();
        if criteria != self.criteria {
            self.criteria = criteria;
            self.provocation_stale = true;
            self.invalidate(d);
        }
    }

    /// Replaces the source columns; every name must exist in `d`.
    pub fn set_source_columns(&mut self, columns: Vec<String>, d: &Dataset) -> Result<(), EngineError> {
        let mut unknown: Vec<String> = Vec::new();
        for c in &columns {
            if !d.has_column(c) && !unknown.contains(c) {
                unknown.push(c.clone());
            }
        }
        if !unknown.is_empty() {
            return Err(EngineError::UnknownColumns(unknown));
        }
        if columns != self.source_columns {
            self.source_columns = columns;
            self.invalidate(d);
        }
        Ok(())
    }

    pub fn set_importance(&mut self, importance: Importance) {
        self.importance = importance;
    }

    fn invalidate(&mut self, d: &Dataset) {
        if self.analysis.is_some() {
            self.analysis_stale = true;
        }
        self.refresh_status(d);
        if self.status == FactorStatus::Analyzed {
            self.status = FactorStatus::Draft;
        }
    }

    /// True when the factor contributes to the global shortlist.
    pub fn is_scored(&self) -> bool {
        self.status == FactorStatus::Analyzed && self.analysis.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMatch {
    pub row_id: RowId,
    pub reason: String,
    /// True when `reason` came from the model rather than the fixed template.
    #[serde(default)]
    pub generated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorAnalysis {
    pub factor_id: FactorId,
    pub profiles: Vec<ColumnProfile>,
    /// Matching rows in dataset order.
    pub local_shortlist: Vec<RowMatch>,
    /// Warnings and notes, one per line.
    pub message: String,
    /// Canonical text of the filter that selected the rows; `None` when the
    /// rows came straight from the model's id list.
    pub filter: Option<String>,
    #[serde(default)]
    pub degraded: bool,
}

impl FactorAnalysis {
    pub fn contains(&self, row: RowId) -> bool {
        self.local_shortlist.binary_search_by_key(&row, |m| m.row_id).is_ok()
    }

    pub fn generated_reason(&self, row: RowId) -> Option<&str> {
        self.local_shortlist
            .binary_search_by_key(&row, |m| m.row_id)
            .ok()
            .map(|i| &self.local_shortlist[i])
            .filter(|m| m.generated)
            .map(|m| m.reason.as_str())
    }
}

/// Model-supplied extras for an analysis: per-row reasons and a message.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnalysisNotes {
    pub reasons: BTreeMap<RowId, String>,
    pub message: String,
}

/// Applies the factor's filter to every row and profiles its source columns.
/// On success the factor is marked analyzed and keeps a copy of the result.
pub fn analyze_factor(f: &mut Factor, d: &Dataset, notes: &AnalysisNotes) -> Result<FactorAnalysis, EngineError> {
    ensure_runnable(f, d)?;
    let filter = f.filter.clone().ok_or_else(|| EngineError::MissingFilter(f.id.clone()))?;
    let set = matching_rows(&filter, d);
    let filter_text = filter.to_string();

    let mut lines = Vec::new();
    if !notes.message.trim().is_empty() {
        lines.push(notes.message.trim().to_string());
    }
    lines.push(match_summary(set.rows.len(), d.len()));
    for (warning, rows) in &set.warnings {
        lines.push(format!("warning: {warning} ({rows} {})", plural(*rows, "row")));
    }

    let default_reason = format!("Matches `{filter_text}`.");
    let analysis = build_analysis(f, d, set.rows, notes, &default_reason, lines, Some(filter_text), false)?;
    Ok(analysis)
}

/// Degraded path: the local shortlist is the given row ids instead of a
/// filter result. Unknown ids are dropped with a warning.
pub fn analyze_factor_from_rows(
    f: &mut Factor,
    d: &Dataset,
    rows: &[RowId],
    notes: &AnalysisNotes,
) -> Result<FactorAnalysis, EngineError> {
    ensure_runnable(f, d)?;
    let mut ids: Vec<RowId> = rows.iter().copied().filter(|&r| r < d.len()).collect();
    let dropped = rows.len() - ids.len();
    ids.sort_unstable();
    ids.dedup();

    let mut lines = Vec::new();
    if !notes.message.trim().is_empty() {
        lines.push(notes.message.trim().to_string());
    }
    lines.push(match_summary(ids.len(), d.len()));
    if dropped > 0 {
        lines.push(format!("warning: ignored {dropped} row {} not in the dataset", plural(dropped, "id")));
    }
    build_analysis(f, d, ids, notes, "Selected by the model.", lines, None, true)
}

fn ensure_runnable(f: &Factor, d: &Dataset) -> Result<(), EngineError> {
    match f.unrunnable_reason(d) {
        Some(reason) => Err(EngineError::UnrunnableFactor {
            factor_id: f.id.clone(),
            reason,
        }),
        None => Ok(()),
    }
}

#[allow(clippy::too_many_arguments)]
fn build_analysis(
    f: &mut Factor,
    d: &Dataset,
    rows: Vec<RowId>,
    notes: &AnalysisNotes,
    default_reason: &str,
    lines: Vec<String>,
    filter: Option<String>,
    degraded: bool,
) -> Result<FactorAnalysis, EngineError> {
    let profiles = f
        .source_columns
        .iter()
        .map(|c| profile_column(d, c).map_err(|_| EngineError::UnknownColumns(vec![c.clone()])))
        .collect::<Result<Vec<_>, _>>()?;
    let local_shortlist = rows
        .into_iter()
        .map(|row_id| match notes.reasons.get(&row_id) {
            Some(reason) if !reason.trim().is_empty() => RowMatch {
                row_id,
                reason: reason.trim().to_string(),
                generated: true,
            },
            _ => RowMatch {
                row_id,
                reason: default_reason.to_string(),
                generated: false,
            },
        })
        .collect();
    let analysis = FactorAnalysis {
        factor_id: f.id.clone(),
        profiles,
        local_shortlist,
        message: lines.join("\n"),
        filter,
        degraded,
    };
    f.analysis = Some(analysis.clone());
    f.analysis_stale = false;
    f.status = FactorStatus::Analyzed;
    Ok(analysis)
}

fn match_summary(matched: usize, total: usize) -> String {
    if matched == 0 {
        format!("Matched 0 of {total} rows; the factor-local shortlist is empty.")
    } else {
        format!("Matched {matched} of {total} rows.")
    }
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        word.to_string()
    } else {
        format!("{word}s")
    }
}
