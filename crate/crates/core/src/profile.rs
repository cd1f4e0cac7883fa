//! Per-column summary statistics shown in factor analyses.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ColumnType, Dataset, Parsed};

/// Maximum number of entries in [`TextProfile::top_values`].
pub const TOP_VALUES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProfileError {
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub column: String,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Summary {
    Numeric(NumericProfile),
    Text(TextProfile),
}

/// Statistics over the numeric cells of a column. Standard deviation uses
/// the population convention (divide by N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericProfile {
    pub count: usize,
    /// Empty cells plus cells that did not parse as numbers.
    pub missing: usize,
    /// Non-empty cells that did not parse as numbers; reported as a warning.
    pub non_numeric: usize,
    /// `None` when the column has no numeric cells.
    pub stats: Option<NumericStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextProfile {
    pub count: usize,
    pub missing: usize,
    pub distinct: usize,
    /// Most frequent values, by count descending then value ascending.
    pub top_values: Vec<(String, usize)>,
}

pub fn profile_column(d: &Dataset, column: &str) -> Result<ColumnProfile, ProfileError> {
    let idx = d
        .column_index(column)
        .ok_or_else(|| ProfileError::UnknownColumn(column.to_string()))?;
    let summary = match d.column_type(column).expect("indexed column has a type") {
        ColumnType::Numeric => {
            let mut values = Vec::with_capacity(d.len());
            let mut non_numeric = 0;
            for row in d.rows() {
                match row.cells[idx].parsed {
                    Parsed::Number(v) => values.push(v),
                    Parsed::Text => non_numeric += 1,
                    Parsed::Missing => {}
                }
            }
            Summary::Numeric(NumericProfile {
                count: values.len(),
                missing: d.len() - values.len(),
                non_numeric,
                stats: numeric_stats(&mut values),
            })
        }
        ColumnType::Text => {
            let mut counts: HashMap<&str, usize> = HashMap::new();
            let mut missing = 0;
            for row in d.rows() {
                let cell = &row.cells[idx];
                if cell.is_missing() {
                    missing += 1;
                } else {
                    *counts.entry(cell.text()).or_default() += 1;
                }
            }
            let distinct = counts.len();
            let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
            ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            Summary::Text(TextProfile {
                count: d.len() - missing,
                missing,
                distinct,
                top_values: ranked
                    .into_iter()
                    .take(TOP_VALUES)
                    .map(|(v, c)| (v.to_string(), c))
                    .collect(),
            })
        }
    };
    Ok(ColumnProfile {
        column: column.to_string(),
        summary,
    })
}

/// Mean and population variance in two passes; selection for the median.
/// Reorders `values`.
pub(crate) fn numeric_stats(values: &mut [f64]) -> Option<NumericStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values.iter() {
        min = min.min(v);
        max = max.max(v);
    }
    // Two passes with compensated sums: a running mean loses relative
    // accuracy when large values cancel.
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let variance = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n as f64;
    let stddev = variance.max(0.0).sqrt();

    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if n % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum = below + upper;
        if sum.is_finite() {
            sum / 2.0
        } else {
            below / 2.0 + upper / 2.0
        }
    };

    Some(NumericStats {
        mean,
        median,
        min,
        max,
        stddev,
    })
}

/// Neumaier's variant of Kahan summation.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}
