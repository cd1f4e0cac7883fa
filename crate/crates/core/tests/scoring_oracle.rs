use std::collections::BTreeSet;

use proptest::prelude::*;
use provoscope_core::dataset::Dataset;
use provoscope_core::factor::{analyze_factor_from_rows, AnalysisNotes, Factor, FactorId, Importance, Weight};
use provoscope_core::shortlist::{compute_global_shortlist, compute_global_shortlist_with, Shade};

const HEADERS: [&str; 4] = ["a", "b", "c", "d"];

#[derive(Debug, Clone)]
struct FactorPlan {
    importance: Importance,
    sources: Vec<usize>,
    rows: BTreeSet<usize>,
    analyzed: bool,
}

fn importance() -> impl Strategy<Value = Importance> {
    prop::sample::select(Importance::ALL.to_vec())
}

fn instance() -> impl Strategy<Value = (usize, Vec<FactorPlan>)> {
    (1usize..80).prop_flat_map(|n| {
        let plan = (
            importance(),
            prop::collection::btree_set(0..HEADERS.len(), 1..3),
            prop::collection::btree_set(0..n, 0..=n),
            prop::bool::weighted(0.85),
        )
            .prop_map(|(importance, sources, rows, analyzed)| FactorPlan {
                importance,
                sources: sources.into_iter().collect(),
                rows,
                analyzed,
            });
        (Just(n), prop::collection::vec(plan, 1..6))
    })
}

fn build(n: usize, plans: &[FactorPlan]) -> (Dataset, Vec<Factor>) {
    let rows: Vec<Vec<String>> = (0..n).map(|i| HEADERS.iter().map(|h| format!("{h}{i}")).collect()).collect();
    let d = Dataset::from_records("s", HEADERS, rows).unwrap();
    let factors = plans
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut f = Factor::new(FactorId::new(format!("f{}", i + 1)), format!("F{}", i + 1), s.importance)
                .with_sources(s.sources.iter().map(|&c| HEADERS[c]))
                .with_criteria("c");
            if s.analyzed {
                let ids: Vec<usize> = s.rows.iter().copied().collect();
                analyze_factor_from_rows(&mut f, &d, &ids, &AnalysisNotes::default()).unwrap();
            }
            f
        })
        .collect();
    (d, factors)
}

fn hundredths(i: Importance) -> u32 {
    match i {
        Importance::High => 100,
        Importance::Medium => 66,
        Importance::Low => 33,
    }
}

/// Scores, ranking and per-cell maximum weight, recomputed from the plans.
fn oracle(n: usize, plans: &[FactorPlan]) -> (Vec<(usize, u32)>, Vec<Vec<u32>>) {
    let mut scored: Vec<(usize, u32)> = (0..n)
        .map(|r| {
            let s = plans
                .iter()
                .filter(|s| s.analyzed && s.rows.contains(&r))
                .map(|s| hundredths(s.importance))
                .sum();
            (r, s)
        })
        .collect();
    // Insertion sort keeps this independent of the engine's sort.
    for i in 1..scored.len() {
        let mut j = i;
        while j > 0 && (scored[j].1 > scored[j - 1].1 || (scored[j].1 == scored[j - 1].1 && scored[j].0 < scored[j - 1].0)) {
            scored.swap(j, j - 1);
            j -= 1;
        }
    }
    let mut cell_max = vec![vec![0u32; HEADERS.len()]; n];
    for s in plans.iter().filter(|s| s.analyzed) {
        for &r in &s.rows {
            for &c in &s.sources {
                cell_max[r][c] = cell_max[r][c].max(hundredths(s.importance));
            }
        }
    }
    (scored, cell_max)
}

fn shade_of(h: u32) -> Shade {
    match h {
        0 => Shade::None,
        33 => Shade::Light,
        66 => Shade::Mid,
        _ => Shade::Strong,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn scores_ranking_and_shades_match_oracle((n, plans) in instance()) {
        let (d, factors) = build(n, &plans);
        let result = compute_global_shortlist(&d, &factors);
        if !plans.iter().any(|s| s.analyzed) {
            prop_assert!(result.is_err());
            return Ok(());
        }
        let g = result.unwrap();
        let (expected, cell_max) = oracle(n, &plans);
        let got: Vec<(usize, u32)> = g.entries.iter().map(|e| (e.row_id, e.score.hundredths())).collect();
        prop_assert_eq!(got, expected);

        for e in &g.entries {
            let ids: Vec<&str> = e.contributors.iter().map(|c| c.factor_id.as_str()).collect();
            let want: Vec<String> = plans
                .iter()
                .enumerate()
                .filter(|(_, s)| s.analyzed && s.rows.contains(&e.row_id))
                .map(|(i, _)| format!("f{}", i + 1))
                .collect();
            prop_assert_eq!(ids, want);
            for (c, h) in HEADERS.iter().enumerate() {
                prop_assert_eq!(g.shade(e.row_id, h), shade_of(cell_max[e.row_id][c]));
            }
        }
    }

    #[test]
    fn ordering_survives_uniform_scaling((n, plans) in instance(), k in 2u32..50) {
        let (d, factors) = build(n, &plans);
        prop_assume!(plans.iter().any(|s| s.analyzed));
        let base = compute_global_shortlist(&d, &factors).unwrap();
        let scaled = compute_global_shortlist_with(&d, &factors, |i| Weight::from_hundredths(hundredths(i) * k)).unwrap();
        prop_assert_eq!(base.ranking(), scaled.ranking());
        for (a, b) in base.entries.iter().zip(&scaled.entries) {
            prop_assert_eq!(a.score.hundredths() * k, b.score.hundredths());
        }
    }

    #[test]
    fn deleting_or_demoting_never_raises_scores((n, plans) in instance(), victim in any::<prop::sample::Index>()) {
        prop_assume!(plans.iter().filter(|s| s.analyzed).count() >= 2);
        let (d, factors) = build(n, &plans);
        let before = compute_global_shortlist(&d, &factors).unwrap();
        let score = |g: &provoscope_core::GlobalShortlist, r: usize| {
            g.entries.iter().find(|e| e.row_id == r).unwrap().score
        };
        let i = victim.index(factors.len());

        let mut fewer = factors.clone();
        fewer.remove(i);
        if let Ok(after) = compute_global_shortlist(&d, &fewer) {
            for r in 0..n {
                prop_assert!(score(&after, r) <= score(&before, r));
            }
        }

        let mut demoted = factors.clone();
        demoted[i].set_importance(Importance::Low);
        let after = compute_global_shortlist(&d, &demoted).unwrap();
        for r in 0..n {
            prop_assert!(score(&after, r) <= score(&before, r));
        }
    }

    #[test]
    fn unanalyzed_factors_contribute_nothing((n, plans) in instance()) {
        prop_assume!(plans.iter().any(|s| s.analyzed));
        let (d, factors) = build(n, &plans);
        let scored_only: Vec<Factor> = factors.iter().filter(|f| f.is_scored()).cloned().collect();
        let all = compute_global_shortlist(&d, &factors).unwrap();
        let subset = compute_global_shortlist(&d, &scored_only).unwrap();
        prop_assert_eq!(all.ranking(), subset.ranking());
        prop_assert_eq!(all.highlights, subset.highlights);
    }
}

#[test]
fn four_rows_three_factors_by_hand() {
    // rows:      0     1     2     3
    // A (High)   x           x
    // B (Medium) x     x
    // C (Low)          x     x     x
    let plans = [
        (Importance::High, vec![0, 2]),
        (Importance::Medium, vec![0, 1]),
        (Importance::Low, vec![1, 2, 3]),
    ]
    .map(|(importance, rows)| FactorPlan {
        importance,
        sources: vec![0],
        rows: rows.into_iter().collect(),
        analyzed: true,
    });
    let (d, factors) = build(4, &plans);
    let g = compute_global_shortlist(&d, &factors).unwrap();
    let got: Vec<(usize, String)> = g.entries.iter().map(|e| (e.row_id, e.score.to_string())).collect();
    let want = [(0, "1.66"), (2, "1.33"), (1, "0.99"), (3, "0.33")].map(|(r, s)| (r, s.to_string()));
    assert_eq!(got, want);
    assert_eq!(g.entries[0].reason, "Meets: F1 (1.0), F2 (0.66). Does not meet: F3.");
}
