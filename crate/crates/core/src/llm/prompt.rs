//! Prompt templates.
//!
//! Prompts are pure functions of their inputs, so identical inputs give
//! byte-identical prompts. Bump [`TEMPLATE_VERSION`] whenever a template
//! changes; it is part of every cache key.

use std::fmt::Write;

use super::GatewayError;
use crate::dataset::{ColumnType, Dataset, Row};
use crate::factor::Factor;

pub const TEMPLATE_VERSION: &str = "provoscope-prompts/1";

/// Upper bound on generated factors.
pub const MAX_FACTORS: usize = 5;
/// Rows of context in a factor-generation prompt.
pub const FACTOR_CONTEXT_ROWS: usize = 40;
/// Rows of context in a factor-analysis prompt.
pub const ANALYSIS_CONTEXT_ROWS: usize = 5;
/// Longer cells are cut to this many characters plus an ellipsis.
pub const MAX_CELL_CHARS: usize = 120;

const FACTOR_FIELDS: &str = r#"Each factor must contain the following information:
- "name": The name of the factor or criteria.
- "source_columns": The list of dataset columns used to evaluate the factor. Use an empty list if no column is suitable.
- "criteria": A description of what a row must satisfy to score highly on this factor.
- "importance": How much the factor matters for the goal, one of "High", "Medium" or "Low".
"#;

const RISK_FIELD: &str = r#"- "risk": The risk of using such criteria, and what alternative criteria could be used.
  Suggest more relevant topics and keywords to the factor description. Even if there
  would be no risk, suggest a case where the opposite of the criteria is better.
"#;

const ANALYSIS_FIELDS: &str = r#"Your answer must contain the following information:
- For each row, the row's "id_" and a "reason" to include the row.
- A "message" containing any warnings.
"#;

const FILTER_LANGUAGE: &str = r#"expr    := or
or      := and { "or" and }
and     := not { "and" not }
not     := ["not"] atom
atom    := "(" expr ")" | pred
pred    := col op lit | col "contains" str | col "startswith" str
         | col "in" "[" lit {"," lit} "]" | col "is" "missing"
op      := "==" | "!=" | "<" | "<=" | ">" | ">="
col     := ident | "`" any-chars "`"
lit     := number | str        str := '"' chars '"'
"#;

/// Whether provocations come back with the factors or from a second call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvocationMode {
    #[default]
    Joint,
    Separate,
}

/// Header line plus one pipe-delimited line per row, `id_` first.
pub fn serialize_rows(d: &Dataset, rows: &[Row]) -> String {
    let mut out = String::from("id_");
    for h in d.headers() {
        out.push_str(" | ");
        out.push_str(&escape_cell(h));
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{}", row.id_);
        for cell in &row.cells {
            out.push_str(" | ");
            out.push_str(&escape_cell(&cell.raw));
        }
        out.push('\n');
    }
    out
}

fn escape_cell(raw: &str) -> String {
    let flat: String = raw
        .trim()
        .chars()
        .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
        .collect();
    let mut text: String = flat.chars().take(MAX_CELL_CHARS).collect();
    if flat.chars().count() > MAX_CELL_CHARS {
        text.push('…');
    }
    text.replace('|', "\\|")
}

fn describe_columns(d: &Dataset) -> String {
    d.column_types()
        .map(|(name, ty)| {
            let ty = match ty {
                ColumnType::Numeric => "numeric",
                ColumnType::Text => "text",
            };
            format!("- {name} ({ty})")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn dataset_context(d: &Dataset, rows: usize) -> String {
    let sample = d.sample_rows(rows);
    format!(
        "The dataset \"{name}\" has {total} rows and these columns:\n{columns}\n\n\
         The first {shown} rows follow, one per line, with the row id first and fields separated by \" | \":\n{rows}",
        name = d.name(),
        total = d.len(),
        columns = describe_columns(d),
        shown = sample.len(),
        rows = serialize_rows(d, sample),
    )
}

fn json_instruction(shape: &str) -> String {
    format!(
        "Respond with a single fenced ```json code block containing an object of the form {shape}. \
         Anything outside the block is ignored."
    )
}

/// Prompt asking for up to five factors for `query`, with the first 40 rows
/// of `d` as context. In joint mode each factor carries its provocation.
pub fn build_factor_prompt(query: &str, d: &Dataset, mode: ProvocationMode) -> Result<String, GatewayError> {
    let query = query.trim();
    if query.is_empty() {
        return Err(GatewayError::EmptyQuery);
    }
    let mut prompt = String::new();
    prompt.push_str(
        "You are helping a user shortlist a small number of rows from a tabular dataset. \
         Your job is to suggest the factors the user should consider, and to critique each one.\n\n",
    );
    prompt.push_str(&dataset_context(d, FACTOR_CONTEXT_ROWS));
    let _ = write!(
        prompt,
        "\nThe user's shortlisting goal:\n{query}\n\n\
         Suggest no more than {MAX_FACTORS} factors for this goal. \
         Only use column names that appear in the dataset.\n\n"
    );
    prompt.push_str(FACTOR_FIELDS);
    let shape = match mode {
        ProvocationMode::Joint => {
            prompt.push_str(RISK_FIELD);
            r#"{"factors": [{"name": ..., "source_columns": [...], "criteria": ..., "importance": ..., "risk": ...}]}"#
        }
        ProvocationMode::Separate => {
            r#"{"factors": [{"name": ..., "source_columns": [...], "criteria": ..., "importance": ...}]}"#
        }
    };
    prompt.push('\n');
    prompt.push_str(&json_instruction(shape));
    prompt.push('\n');
    Ok(prompt)
}

/// Second-call prompt used in separate provocation mode.
pub fn build_provocation_prompt(query: &str, factors_json: &str, d: &Dataset) -> String {
    let mut prompt = String::new();
    prompt.push_str("You are critiquing factors that were suggested for shortlisting rows from a tabular dataset.\n\n");
    prompt.push_str(&dataset_context(d, FACTOR_CONTEXT_ROWS));
    let _ = write!(
        prompt,
        "\nThe user's shortlisting goal:\n{}\n\nThe suggested factors:\n{}\n\n",
        query.trim(),
        factors_json.trim()
    );
    prompt.push_str("For each factor, in the same order, return its \"name\" and:\n");
    prompt.push_str(RISK_FIELD);
    prompt.push('\n');
    prompt.push_str(&json_instruction(r#"{"factors": [{"name": ..., "risk": ...}]}"#));
    prompt.push('\n');
    prompt
}

/// Prompt asking for a filter expression implementing `f`'s criteria, with
/// the first 5 rows of `d` as context.
pub fn build_analysis_prompt(f: &Factor, d: &Dataset) -> Result<String, GatewayError> {
    let criteria = f.criteria.trim();
    if criteria.is_empty() {
        return Err(GatewayError::EmptyCriteria);
    }
    let mut prompt = String::new();
    prompt.push_str("You are helping a user apply one shortlisting factor to every row of a tabular dataset.\n\n");
    let _ = write!(
        prompt,
        "Factor: {}\nCriteria: {}\nSource columns: {}\n\n",
        f.title.trim(),
        criteria,
        f.source_columns.join(", ")
    );
    prompt.push_str(&dataset_context(d, ANALYSIS_CONTEXT_ROWS));
    prompt.push_str(
        "\nWrite a filter that selects the rows satisfying the criteria. The filter is run against the whole \
         dataset, so it must only use this filter language:\n\n",
    );
    prompt.push_str(FILTER_LANGUAGE);
    prompt.push_str(
        "\nKeywords are case-insensitive. Column names are case-sensitive; put names that are not plain \
         identifiers in backticks. Strings use double quotes. `contains` and `startswith` ignore case; \
         `==` and `!=` do not. There is no arithmetic.\n\n",
    );
    prompt.push_str(ANALYSIS_FIELDS);
    prompt.push_str("- A \"filter\" written in the filter language above.\n\n");
    prompt.push_str("Give an \"id_\" and \"reason\" only for rows shown above that satisfy the criteria.\n");
    prompt.push_str(&json_instruction(
        r#"{"filter": "...", "rows": [{"id_": 0, "reason": "..."}], "message": "..."}"#,
    ));
    prompt.push('\n');
    Ok(prompt)
}

/// The analysis prompt again, with the reason the previous filter was rejected.
pub fn build_retry_prompt(original: &str, rejected_filter: Option<&str>, problem: &str) -> String {
    let mut prompt = original.to_string();
    match rejected_filter {
        Some(filter) => {
            let _ = write!(prompt, "\nYour previous filter `{filter}` could not be used: {problem}\n");
        }
        None => {
            let _ = write!(prompt, "\nYour previous answer could not be used: {problem}\n");
        }
    }
    prompt.push_str("Answer again in the same format with a corrected filter.\n");
    prompt
}
