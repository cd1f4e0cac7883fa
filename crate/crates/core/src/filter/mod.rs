//! A small, total boolean filter language over dataset rows.
//!
//! ```text
//! expr    := or
//! or      := and { "or" and }
//! and     := not { "and" not }
//! not     := ["not"] atom
//! atom    := "(" expr ")" | pred
//! pred    := col op lit | col "contains" str | col "startswith" str
//!          | col "in" "[" lit {"," lit} "]" | col "is" "missing"
//! op      := "==" | "!=" | "<" | "<=" | ">" | ">="
//! col     := ident | "`" any-chars "`"
//! lit     := number | str
//! ```
//!
//! Keywords are case-insensitive, column names are case-sensitive. Inside
//! backticks a doubled backtick stands for one literal backtick; inside
//! strings `\"` and `\\` escape.

mod eval;
mod lexer;
mod parser;
mod print;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use eval::{eval_filter, matching_rows, EvalOutcome, MatchSet};
pub use parser::parse_filter;
pub use print::print_filter;

use crate::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FilterExpr {
    Cmp {
        column: String,
        op: CmpOp,
        value: Literal,
    },
    /// Case-insensitive substring test.
    Contains { column: String, needle: String },
    /// Case-insensitive prefix test.
    StartsWith { column: String, prefix: String },
    InSet { column: String, values: Vec<Literal> },
    IsMissing { column: String },
    And(Box<FilterExpr>, Box<FilterExpr>),
    Or(Box<FilterExpr>, Box<FilterExpr>),
    Not(Box<FilterExpr>),
}

impl FilterExpr {
    pub fn and(self, other: FilterExpr) -> FilterExpr {
        FilterExpr::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: FilterExpr) -> FilterExpr {
        FilterExpr::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> FilterExpr {
        FilterExpr::Not(Box::new(self))
    }

    pub fn is_predicate(&self) -> bool {
        !matches!(self, FilterExpr::And(..) | FilterExpr::Or(..) | FilterExpr::Not(_))
    }

    /// Every column reference, in left-to-right order (with repeats).
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            FilterExpr::Cmp { column, .. }
            | FilterExpr::Contains { column, .. }
            | FilterExpr::StartsWith { column, .. }
            | FilterExpr::InSet { column, .. }
            | FilterExpr::IsMissing { column } => out.push(column),
            FilterExpr::And(l, r) | FilterExpr::Or(l, r) => {
                l.collect_columns(out);
                r.collect_columns(out);
            }
            FilterExpr::Not(e) => e.collect_columns(out),
        }
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_filter(self))
    }
}

impl std::str::FromStr for FilterExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_filter(s)
    }
}

// Filters travel as their canonical text.
impl Serialize for FilterExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&print_filter(self))
    }
}

impl<'de> Deserialize<'de> for FilterExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_filter(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at token {token} (byte {offset}): expected {expected}, found {found}")]
pub struct ParseError {
    /// 1-based index of the offending token; one past the last token at end of input.
    pub token: usize,
    /// Byte offset of the offending token in the source.
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

/// Column names referenced by `e` that `d` does not have, deduplicated in
/// first-occurrence order.
pub fn validate_columns(e: &FilterExpr, d: &Dataset) -> Vec<String> {
    let mut unknown: Vec<String> = Vec::new();
    for column in e.columns() {
        if !d.has_column(column) && !unknown.iter().any(|u| u == column) {
            unknown.push(column.to_string());
        }
    }
    unknown
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_reports_unknown_in_order() {
        let d = Dataset::from_records("t", ["Rating", "Genre"], [["1", "x"]]).unwrap();
        let ok = parse_filter("Rating >= 7.5 and Genre contains \"a\"").unwrap();
        assert!(validate_columns(&ok, &d).is_empty());

        let one = parse_filter("Budget > 10").unwrap();
        assert_eq!(validate_columns(&one, &d), ["Budget"]);

        let two = parse_filter("Year > 1 or (Rating > 2 and not Budget is missing) or Year < 3").unwrap();
        assert_eq!(validate_columns(&two, &d), ["Year", "Budget"]);
    }

    #[test]
    fn serde_uses_canonical_text() {
        let e = parse_filter("a == 1 AND b != \"x\"").unwrap();
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#""a == 1.0 and b != \"x\"""#);
        let back: FilterExpr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }
}
