use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::prompt::{build_provocation_prompt, build_retry_prompt};
pub use super::prompt::ProvocationMode;
use super::response::{parse_factor_list, parse_provocations, AnalysisResponse, FactorDrafts};
use super::{
    build_analysis_prompt, build_factor_prompt, parse_analysis_response, CallKind, ChatProvider, GatewayError,
    LlmCall, TEMPLATE_VERSION,
};
use crate::dataset::{Dataset, RowId};
use crate::factor::{AnalysisNotes, Factor};
use crate::filter::{parse_filter, validate_columns, FilterExpr};

/// How a factor's local shortlist is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Filter(FilterExpr),
    /// Degraded mode: the rows the model listed by id.
    Rows(Vec<RowId>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisPlan {
    pub selection: Selection,
    pub notes: AnalysisNotes,
    /// Number of re-prompts issued (0 or 1).
    pub retries: u8,
}

/// Builds prompts, sends them through a provider and parses the replies.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    model: String,
    provocation_mode: ProvocationMode,
}

impl Gateway {
    pub fn new(provider: Arc<dyn ChatProvider>, model: impl Into<String>) -> Self {
        Gateway {
            provider,
            model: model.into(),
            provocation_mode: ProvocationMode::Joint,
        }
    }

    pub fn with_provocation_mode(mut self, mode: ProvocationMode) -> Self {
        self.provocation_mode = mode;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    fn call(&self, kind: CallKind, d: &Dataset, prompt: String) -> LlmCall {
        LlmCall {
            kind,
            template_version: TEMPLATE_VERSION.to_string(),
            model: self.model.clone(),
            dataset: d.fingerprint(),
            prompt,
        }
    }

    /// Asks for factors and their provocations. Joint mode makes exactly one
    /// provider call; separate mode makes two.
    pub async fn generate_factors(&self, query: &str, d: &Dataset) -> Result<FactorDrafts, GatewayError> {
        let prompt = build_factor_prompt(query, d, self.provocation_mode)?;
        let raw = self.provider.complete(&self.call(CallKind::FactorGeneration, d, prompt)).await?;
        match self.provocation_mode {
            ProvocationMode::Joint => parse_factor_list(&raw, Some(d), true),
            ProvocationMode::Separate => {
                let mut drafts = parse_factor_list(&raw, Some(d), false)?;
                #[derive(Serialize)]
                struct Brief<'a> {
                    name: &'a str,
                    criteria: &'a str,
                    source_columns: &'a [String],
                }
                let briefs: Vec<Brief> = drafts
                    .drafts
                    .iter()
                    .map(|f| Brief {
                        name: &f.name,
                        criteria: &f.criteria,
                        source_columns: &f.source_columns,
                    })
                    .collect();
                let listing = serde_json::to_string_pretty(&briefs).expect("briefs serialize");
                let prompt = build_provocation_prompt(query, &listing, d);
                let raw = self.provider.complete(&self.call(CallKind::Provocation, d, prompt)).await?;
                let risks = parse_provocations(&raw, drafts.drafts.len())?;
                for (draft, risk) in drafts.drafts.iter_mut().zip(risks) {
                    draft.risk = risk;
                }
                Ok(drafts)
            }
        }
    }

    /// Asks for a filter implementing `f`'s criteria.
    ///
    /// If the reply's filter does not parse or names unknown columns, the
    /// prompt is sent once more with the problem appended. If that also
    /// fails, the rows the model listed by id become the local shortlist.
    /// With no rows either, the analysis is unusable.
    pub async fn generate_filter_with_fallback(&self, f: &Factor, d: &Dataset) -> Result<AnalysisPlan, GatewayError> {
        let prompt = build_analysis_prompt(f, d)?;
        let first_raw = self.provider.complete(&self.call(CallKind::Analysis, d, prompt.clone())).await?;
        let first = parse_analysis_response(&first_raw);
        let first_problem = match usable_filter(&first, d) {
            Ok((expr, reply)) => {
                return Ok(AnalysisPlan {
                    selection: Selection::Filter(expr),
                    notes: notes_from(reply, None),
                    retries: 0,
                });
            }
            Err(problem) => problem,
        };

        let rejected = first.as_ref().ok().and_then(|r| r.filter.as_deref());
        let retry_prompt = build_retry_prompt(&prompt, rejected, &first_problem);
        let second_raw = self
            .provider
            .complete(&self.call(CallKind::AnalysisRetry, d, retry_prompt))
            .await?;
        let second = parse_analysis_response(&second_raw);
        let second_problem = match usable_filter(&second, d) {
            Ok((expr, reply)) => {
                let note = format!("The first filter was rejected ({first_problem}); used the filter from one retry.");
                return Ok(AnalysisPlan {
                    selection: Selection::Filter(expr),
                    notes: notes_from(reply, Some(note)),
                    retries: 1,
                });
            }
            Err(problem) => problem,
        };

        let with_rows = [second.ok(), first.ok()]
            .into_iter()
            .flatten()
            .find(|r| !r.rows.is_empty());
        match with_rows {
            Some(reply) => {
                let rows = reply.rows.iter().map(|r| r.id_).collect();
                let note = format!(
                    "Degraded mode: no usable filter after one retry ({second_problem}); \
                     the factor-local shortlist contains only the rows the model listed."
                );
                Ok(AnalysisPlan {
                    selection: Selection::Rows(rows),
                    notes: notes_from(&reply, Some(note)),
                    retries: 1,
                })
            }
            None => Err(GatewayError::UnusableAnalysis(format!(
                "first reply: {first_problem}; retry: {second_problem}"
            ))),
        }
    }
}

fn usable_filter<'a>(
    reply: &'a Result<AnalysisResponse, GatewayError>,
    d: &Dataset,
) -> Result<(FilterExpr, &'a AnalysisResponse), String> {
    let reply = reply.as_ref().map_err(|e| e.to_string())?;
    let text = reply.filter.as_deref().ok_or("the reply has no filter")?;
    let expr = parse_filter(text).map_err(|e| e.to_string())?;
    let unknown = validate_columns(&expr, d);
    if !unknown.is_empty() {
        return Err(format!("unknown columns: {}", unknown.join(", ")));
    }
    Ok((expr, reply))
}

fn notes_from(reply: &AnalysisResponse, extra: Option<String>) -> AnalysisNotes {
    let reasons: BTreeMap<RowId, String> = reply
        .rows
        .iter()
        .filter(|r| !r.reason.is_empty())
        .map(|r| (r.id_, r.reason.clone()))
        .collect();
    let message = [Some(reply.message.clone()), extra]
        .into_iter()
        .flatten()
        .filter(|m| !m.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    AnalysisNotes { reasons, message }
}
