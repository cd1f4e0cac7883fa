//! Parsing structured model responses.
//!
//! Models are asked for a single fenced JSON block. The first fenced block is
//! used; without a fence the whole reply must be JSON.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::prompt::MAX_FACTORS;
use super::GatewayError;
use crate::dataset::{Dataset, RowId};
use crate::factor::Importance;

/// The JSON text inside the first fenced code block, or the whole reply when
/// it has no fence.
pub fn extract_json_block(raw: &str) -> &str {
    if let Some(open) = raw.find("```") {
        let after = &raw[open + 3..];
        // skip a language tag such as `json`
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        if let Some(close) = body.find("```") {
            return body[..close].trim();
        }
        return body.trim();
    }
    raw.trim()
}

fn parse_json(raw: &str) -> Result<Value, GatewayError> {
    serde_json::from_str(extract_json_block(raw)).map_err(|e| GatewayError::NotJson(e.to_string()))
}

fn schema(field: &str, index: Option<usize>) -> GatewayError {
    GatewayError::SchemaError {
        field: field.to_string(),
        index,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorDraft {
    pub name: String,
    pub source_columns: Vec<String>,
    pub criteria: String,
    pub importance: Importance,
    pub risk: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FactorDrafts {
    pub drafts: Vec<FactorDraft>,
    pub warnings: Vec<String>,
}

/// Accepts `{"factors": [...]}` or a bare array.
fn factor_list(value: Value) -> Result<Vec<Value>, GatewayError> {
    match value {
        Value::Array(items) => Ok(items),
        Value::Object(mut obj) => match obj.remove("factors") {
            Some(Value::Array(items)) => Ok(items),
            _ => Err(schema("factors", None)),
        },
        _ => Err(schema("factors", None)),
    }
}

fn required_text(obj: &Map<String, Value>, field: &str, index: usize) -> Result<String, GatewayError> {
    match obj.get(field) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        _ => Err(schema(field, Some(index))),
    }
}

/// Parses a factor-generation reply into 1 to 5 drafts. Drafts beyond the
/// fifth are dropped. When `d` is given, source columns it does not have are
/// dropped with a warning, which may leave a draft with no source columns.
pub fn parse_factor_response(raw: &str, d: Option<&Dataset>) -> Result<FactorDrafts, GatewayError> {
    parse_factor_list(raw, d, true)
}

pub(crate) fn parse_factor_list(raw: &str, d: Option<&Dataset>, require_risk: bool) -> Result<FactorDrafts, GatewayError> {
    let mut items = factor_list(parse_json(raw)?)?;
    if items.is_empty() {
        return Err(schema("factors", None));
    }
    let mut warnings = Vec::new();
    if items.len() > MAX_FACTORS {
        warnings.push(format!(
            "model returned {} factors; kept the first {MAX_FACTORS}",
            items.len()
        ));
        items.truncate(MAX_FACTORS);
    }

    let mut drafts = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let Value::Object(obj) = item else {
            return Err(schema("factors", Some(i)));
        };
        let name = required_text(&obj, "name", i)?;
        let criteria = required_text(&obj, "criteria", i)?;
        let risk = if require_risk {
            required_text(&obj, "risk", i)?
        } else {
            String::new()
        };
        let importance = match obj.get("importance") {
            Some(Value::String(s)) => s.parse::<Importance>().map_err(|_| schema("importance", Some(i)))?,
            _ => return Err(schema("importance", Some(i))),
        };
        let mut source_columns = match obj.get("source_columns") {
            Some(Value::Array(cols)) => cols
                .iter()
                .map(|c| c.as_str().map(|s| s.trim().to_string()).ok_or_else(|| schema("source_columns", Some(i))))
                .collect::<Result<Vec<_>, _>>()?,
            Some(Value::Null) => Vec::new(),
            _ => return Err(schema("source_columns", Some(i))),
        };
        if let Some(d) = d {
            let (known, unknown): (Vec<_>, Vec<_>) = source_columns.into_iter().partition(|c| d.has_column(c));
            for column in unknown {
                warnings.push(format!("factor {name:?}: dropped unknown source column {column:?}"));
            }
            source_columns = known;
        }
        let mut seen = std::collections::HashSet::new();
        source_columns.retain(|c| seen.insert(c.clone()));
        drafts.push(FactorDraft {
            name,
            source_columns,
            criteria,
            importance,
            risk,
        });
    }
    Ok(FactorDrafts { drafts, warnings })
}

/// Parses the second-call reply in separate provocation mode: one
/// `{"name", "risk"}` per factor, matched by position.
pub(crate) fn parse_provocations(raw: &str, expected: usize) -> Result<Vec<String>, GatewayError> {
    let items = factor_list(parse_json(raw)?)?;
    if items.len() < expected {
        return Err(schema("risk", Some(items.len())));
    }
    items
        .into_iter()
        .take(expected)
        .enumerate()
        .map(|(i, item)| match item {
            Value::Object(obj) => required_text(&obj, "risk", i),
            _ => Err(schema("factors", Some(i))),
        })
        .collect()
}

/// Renders drafts in the schema the factor prompt asks for.
pub fn render_factor_response(drafts: &[FactorDraft]) -> String {
    #[derive(Serialize)]
    struct Body<'a> {
        factors: &'a [FactorDraft],
    }
    let json = serde_json::to_string_pretty(&Body { factors: drafts }).expect("drafts serialize");
    format!("```json\n{json}\n```")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowReason {
    pub id_: RowId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnalysisResponse {
    pub filter: Option<String>,
    pub rows: Vec<RowReason>,
    pub message: String,
}

/// Parses a factor-analysis reply. Only the JSON itself is validated here;
/// whether the filter parses is decided by the caller.
pub fn parse_analysis_response(raw: &str) -> Result<AnalysisResponse, GatewayError> {
    let Value::Object(obj) = parse_json(raw)? else {
        return Err(schema("filter", None));
    };
    let filter = match obj.get("filter") {
        Some(Value::String(s)) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Some(Value::String(_)) | Some(Value::Null) | None => None,
        Some(_) => return Err(schema("filter", None)),
    };
    let message = match obj.get("message") {
        Some(Value::String(s)) => s.trim().to_string(),
        Some(Value::Null) | None => String::new(),
        Some(_) => return Err(schema("message", None)),
    };
    let mut rows = Vec::new();
    match obj.get("rows") {
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let id_ = match item.get("id_") {
                    Some(Value::Number(n)) => n.as_u64().map(|v| v as RowId),
                    Some(Value::String(s)) => s.trim().parse::<RowId>().ok(),
                    _ => None,
                }
                .ok_or_else(|| schema("id_", Some(i)))?;
                let reason = item.get("reason").and_then(Value::as_str).unwrap_or_default().trim().to_string();
                rows.push(RowReason { id_, reason });
            }
        }
        Some(Value::Null) | None => {}
        Some(_) => return Err(schema("rows", None)),
    }
    Ok(AnalysisResponse { filter, rows, message })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factor_json(name: &str, risk: Option<&str>) -> String {
        let risk = risk.map(|r| format!(r#", "risk": "{r}""#)).unwrap_or_default();
        format!(
            r#"{{"name": "{name}", "source_columns": ["rating", "budget"], "criteria": "c {name}", "importance": "medium"{risk}}}"#
        )
    }

    fn reply(n: usize) -> String {
        let items: Vec<String> = (0..n).map(|i| factor_json(&format!("F{i}"), Some("r"))).collect();
        format!("Here you go:\n```json\n{{\"factors\": [{}]}}\n```\nHope that helps!", items.join(","))
    }

    #[test]
    fn three_factors() {
        let drafts = parse_factor_response(&reply(3), None).unwrap();
        assert_eq!(drafts.drafts.len(), 3);
        let first = &drafts.drafts[0];
        assert_eq!(first.name, "F0");
        assert_eq!(first.criteria, "c F0");
        assert_eq!(first.importance, Importance::Medium);
        assert_eq!(first.risk, "r");
        assert_eq!(first.source_columns, ["rating", "budget"]);
    }

    #[test]
    fn missing_risk() {
        let raw = format!("[{}, {}]", factor_json("A", Some("r")), factor_json("B", None));
        match parse_factor_response(&raw, None).unwrap_err() {
            GatewayError::SchemaError { field, index } => {
                assert_eq!(field, "risk");
                assert_eq!(index, Some(1));
            }
            other => panic!("{other}"),
        }
        let blank = format!("[{}]", factor_json("A", Some("  ")));
        assert!(matches!(parse_factor_response(&blank, None), Err(GatewayError::SchemaError { .. })));
    }

    #[test]
    fn seven_factors_truncate_to_five() {
        let drafts = parse_factor_response(&reply(7), None).unwrap();
        assert_eq!(drafts.drafts.len(), 5);
        assert_eq!(drafts.drafts[4].name, "F4");
        assert_eq!(drafts.warnings.len(), 1);
    }

    #[test]
    fn not_json_and_empty() {
        assert!(matches!(parse_factor_response("sorry, I can't", None), Err(GatewayError::NotJson(_))));
        assert!(matches!(parse_factor_response("[]", None), Err(GatewayError::SchemaError { .. })));
        let bad_importance = r#"[{"name": "a", "criteria": "b", "risk": "c", "importance": "urgent", "source_columns": []}]"#;
        assert!(matches!(
            parse_factor_response(bad_importance, None),
            Err(GatewayError::SchemaError { ref field, .. }) if field == "importance"
        ));
    }

    #[test]
    fn unknown_columns_dropped() {
        let d = Dataset::from_records("t", ["rating"], [["1"]]).unwrap();
        let drafts = parse_factor_response(&reply(1), Some(&d)).unwrap();
        assert_eq!(drafts.drafts[0].source_columns, ["rating"]);
        assert_eq!(drafts.warnings.len(), 1);

        let d = Dataset::from_records("t", ["other"], [["1"]]).unwrap();
        let drafts = parse_factor_response(&reply(1), Some(&d)).unwrap();
        assert!(drafts.drafts[0].source_columns.is_empty());
    }

    #[test]
    fn render_is_inverse_of_parse() {
        let drafts = parse_factor_response(&reply(4), None).unwrap().drafts;
        let again = parse_factor_response(&render_factor_response(&drafts), None).unwrap().drafts;
        assert_eq!(drafts, again);
    }

    #[test]
    fn analysis_reply() {
        let raw = r#"```json
{"filter": "rating <= 4.0", "rows": [{"id_": 1, "reason": "low"}, {"id_": "3", "reason": "lower"}], "message": "Ratings are user scores."}
```"#;
        let a = parse_analysis_response(raw).unwrap();
        assert_eq!(a.filter.as_deref(), Some("rating <= 4.0"));
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.rows[1].id_, 3);
        assert_eq!(a.message, "Ratings are user scores.");

        let no_filter = parse_analysis_response(r#"{"rows": [], "message": ""}"#).unwrap();
        assert_eq!(no_filter.filter, None);
        assert!(parse_analysis_response(r#"{"rows": [{"id_": -1}]}"#).is_err());
    }

    #[test]
    fn unterminated_fence() {
        assert_eq!(extract_json_block("```json\n{\"a\": 1}"), "{\"a\": 1}");
        assert_eq!(extract_json_block("  [1]  "), "[1]");
    }
}
