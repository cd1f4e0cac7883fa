use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CmpOp, FilterExpr, Literal};
use crate::dataset::{Cell, Dataset, Row, RowId};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub matched: bool,
    pub warnings: Vec<String>,
}

/// Evaluates `e` against one row. Never fails: unknown columns, missing
/// cells and failed numeric coercions make the affected predicate false and
/// add a warning.
pub fn eval_filter(e: &FilterExpr, row: &Row, d: &Dataset) -> EvalOutcome {
    let mut warnings = Vec::new();
    let matched = eval_node(e, row, d, &mut warnings);
    EvalOutcome { matched, warnings }
}

/// Rows matched by a filter over a whole dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchSet {
    pub rows: Vec<RowId>,
    /// Distinct warning texts with the number of rows that produced them.
    pub warnings: BTreeMap<String, usize>,
}

pub fn matching_rows(e: &FilterExpr, d: &Dataset) -> MatchSet {
    let mut set = MatchSet::default();
    let mut warnings = Vec::new();
    for row in d.rows() {
        warnings.clear();
        if eval_node(e, row, d, &mut warnings) {
            set.rows.push(row.id_);
        }
        warnings.sort_unstable();
        warnings.dedup();
        for w in warnings.drain(..) {
            *set.warnings.entry(w).or_default() += 1;
        }
    }
    set
}

fn eval_node(e: &FilterExpr, row: &Row, d: &Dataset, warnings: &mut Vec<String>) -> bool {
    match e {
        FilterExpr::And(l, r) => eval_node(l, row, d, warnings) && eval_node(r, row, d, warnings),
        FilterExpr::Or(l, r) => eval_node(l, row, d, warnings) || eval_node(r, row, d, warnings),
        FilterExpr::Not(inner) => !eval_node(inner, row, d, warnings),
        FilterExpr::IsMissing { column } => match cell(column, row, d, warnings) {
            Some(c) => c.is_missing(),
            None => false,
        },
        FilterExpr::Cmp { column, op, value } => {
            let Some(c) = present_cell(column, row, d, warnings) else {
                return false;
            };
            match value {
                Literal::Number(n) => match c.number() {
                    Some(v) => match v.partial_cmp(n) {
                        Some(ord) => op_holds(*op, ord),
                        None => false,
                    },
                    None => {
                        warnings.push(not_a_number(column));
                        false
                    }
                },
                Literal::Text(s) => op_holds(*op, c.text().cmp(s.as_str())),
            }
        }
        FilterExpr::Contains { column, needle } => match present_cell(column, row, d, warnings) {
            Some(c) => c.text().to_lowercase().contains(&needle.to_lowercase()),
            None => false,
        },
        FilterExpr::StartsWith { column, prefix } => match present_cell(column, row, d, warnings) {
            Some(c) => c.text().to_lowercase().starts_with(&prefix.to_lowercase()),
            None => false,
        },
        FilterExpr::InSet { column, values } => {
            let Some(c) = present_cell(column, row, d, warnings) else {
                return false;
            };
            let mut coercion_failed = false;
            let hit = values.iter().any(|v| match v {
                Literal::Number(n) => match c.number() {
                    Some(x) => x == *n,
                    None => {
                        coercion_failed = true;
                        false
                    }
                },
                Literal::Text(s) => c.text() == s,
            });
            if !hit && coercion_failed {
                warnings.push(not_a_number(column));
            }
            hit
        }
    }
}

fn op_holds(op: CmpOp, ord: Ordering) -> bool {
    match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    }
}

fn cell<'r>(column: &str, row: &'r Row, d: &Dataset, warnings: &mut Vec<String>) -> Option<&'r Cell> {
    match d.column_index(column).and_then(|i| row.cells.get(i)) {
        Some(c) => Some(c),
        None => {
            warnings.push(format!("unknown column `{column}`"));
            None
        }
    }
}

fn present_cell<'r>(column: &str, row: &'r Row, d: &Dataset, warnings: &mut Vec<String>) -> Option<&'r Cell> {
    let c = cell(column, row, d, warnings)?;
    if c.is_missing() {
        warnings.push(format!("column `{column}` has a missing value"));
        None
    } else {
        Some(c)
    }
}

fn not_a_number(column: &str) -> String {
    format!("column `{column}` has a non-numeric value compared with a number")
}
