//! The global shortlist: every row ranked by its weighted factor score.
//!
//! A row's score is the sum of the weights of the analyzed factors whose
//! factor-local shortlist contains it. Rows are ordered by score descending,
//! then by row id.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, RowId};
use crate::factor::{importance_weight, EngineError, Factor, FactorId, Importance, Weight};

/// Cell highlight intensity, ordered `None < Light < Mid < Strong`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Shade {
    None,
    Light,
    Mid,
    Strong,
}

/// Maps the four weights `0, 0.33, 0.66, 1.0` to increasing shades.
pub fn highlight_shade(w: Weight) -> Result<Shade, EngineError> {
    match w.hundredths() {
        0 => Ok(Shade::None),
        33 => Ok(Shade::Light),
        66 => Ok(Shade::Mid),
        100 => Ok(Shade::Strong),
        _ => Err(EngineError::UnknownWeight(w)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contributor {
    pub factor_id: FactorId,
    pub weight: Weight,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedRow {
    pub row_id: RowId,
    pub score: Weight,
    /// Satisfied factors in factor-card order.
    pub contributors: Vec<Contributor>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub row_id: RowId,
    pub column: String,
    pub shade: Shade,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalShortlist {
    pub entries: Vec<RankedRow>,
    /// Highlighted cells ordered by row id, then column position.
    pub highlights: Vec<Highlight>,
}

impl GlobalShortlist {
    pub fn shade(&self, row_id: RowId, column: &str) -> Shade {
        self.highlights
            .iter()
            .find(|h| h.row_id == row_id && h.column == column)
            .map_or(Shade::None, |h| h.shade)
    }

    pub fn ranking(&self) -> Vec<RowId> {
        self.entries.iter().map(|e| e.row_id).collect()
    }
}

/// Ranks all rows of `d` using the standard importance weights.
pub fn compute_global_shortlist(d: &Dataset, factors: &[Factor]) -> Result<GlobalShortlist, EngineError> {
    compute_global_shortlist_with(d, factors, importance_weight)
}

/// Like [`compute_global_shortlist`] with a caller-supplied weight per
/// importance level. Highlight shades always follow the importance level.
pub fn compute_global_shortlist_with(
    d: &Dataset,
    factors: &[Factor],
    weight_of: impl Fn(Importance) -> Weight,
) -> Result<GlobalShortlist, EngineError> {
    let scored: Vec<&Factor> = factors.iter().filter(|f| f.is_scored()).collect();
    if scored.is_empty() {
        return Err(EngineError::NoAnalyzedFactors);
    }

    // membership[f][row]
    let membership: Vec<Vec<bool>> = scored
        .iter()
        .map(|f| {
            let mut hit = vec![false; d.len()];
            for m in &f.analysis.as_ref().expect("scored factors are analyzed").local_shortlist {
                if let Some(slot) = hit.get_mut(m.row_id) {
                    *slot = true;
                }
            }
            hit
        })
        .collect();

    let mut entries: Vec<RankedRow> = Vec::with_capacity(d.len());
    let mut cells: BTreeMap<(RowId, usize), Shade> = BTreeMap::new();
    for row in d.rows() {
        let mut contributors = Vec::new();
        let mut score = Weight::ZERO;
        for (f, hit) in scored.iter().zip(&membership) {
            if !hit[row.id_] {
                continue;
            }
            let weight = weight_of(f.importance);
            score += weight;
            contributors.push(Contributor {
                factor_id: f.id.clone(),
                weight,
            });
            let shade = highlight_shade(importance_weight(f.importance))?;
            for column in &f.source_columns {
                if let Some(col) = d.column_index(column) {
                    let slot = cells.entry((row.id_, col)).or_insert(Shade::None);
                    *slot = (*slot).max(shade);
                }
            }
        }
        let mut entry = RankedRow {
            row_id: row.id_,
            score,
            contributors,
            reason: String::new(),
        };
        entry.reason = compose_reason(&entry, factors);
        entries.push(entry);
    }

    entries.sort_by(|a, b| b.score.cmp(&a.score).then(a.row_id.cmp(&b.row_id)));

    let highlights = cells
        .into_iter()
        .filter(|(_, shade)| *shade != Shade::None)
        .map(|((row_id, col), shade)| Highlight {
            row_id,
            column: d.headers()[col].clone(),
            shade,
        })
        .collect();

    Ok(GlobalShortlist { entries, highlights })
}

/// Summary of how a row was scored: satisfied factors with weights, then the
/// analyzed factors it misses, then any model-written reasons for the
/// satisfied factors.
pub fn compose_reason(row: &RankedRow, factors: &[Factor]) -> String {
    let by_id = |id: &FactorId| factors.iter().find(|f| &f.id == id);

    let met: Vec<String> = row
        .contributors
        .iter()
        .map(|c| {
            let title = by_id(&c.factor_id).map_or(c.factor_id.as_str(), |f| f.display_title());
            format!("{title} ({})", c.weight)
        })
        .collect();
    if met.is_empty() {
        return "Meets no analyzed factors.".to_string();
    }

    let mut text = format!("Meets: {}.", met.join(", "));
    let missed: Vec<&str> = factors
        .iter()
        .filter(|f| f.is_scored() && !row.contributors.iter().any(|c| c.factor_id == f.id))
        .map(Factor::display_title)
        .collect();
    if !missed.is_empty() {
        text.push_str(&format!(" Does not meet: {}.", missed.join(", ")));
    }

    for c in &row.contributors {
        let Some(f) = by_id(&c.factor_id) else { continue };
        if let Some(reason) = f.analysis.as_ref().and_then(|a| a.generated_reason(row.row_id)) {
            text.push_str(&format!(" {}: {}", f.display_title(), reason));
        }
    }
    text
}
