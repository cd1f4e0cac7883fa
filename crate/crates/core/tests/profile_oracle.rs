use proptest::prelude::*;
use provoscope_core::dataset::Dataset;
use provoscope_core::profile::{profile_column, NumericStats, Summary};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Exactly rounded sum of floats (Shewchuk's partials).
fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    partials.iter().rev().fold(0.0, |acc, p| acc + p)
}

/// Two passes over a sorted copy: mean first, then squared deviations.
fn oracle(values: &[f64]) -> NumericStats {
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = exact_sum(values.iter().copied()) / n;
    let variance = exact_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    };
    NumericStats {
        mean,
        median,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        stddev: variance.sqrt(),
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn stats_of(values: &[f64]) -> NumericStats {
    let d = Dataset::from_records("p", ["v"], values.iter().map(|v| [format!("{v:?}")])).unwrap();
    match profile_column(&d, "v").unwrap().summary {
        Summary::Numeric(p) => {
            assert_eq!(p.count, values.len());
            assert_eq!(p.missing, 0);
            p.stats.unwrap()
        }
        Summary::Text(_) => panic!("numeric column typed as text"),
    }
}

fn assert_matches(values: &[f64]) -> Result<(), String> {
    let got = stats_of(values);
    let want = oracle(values);
    for (name, g, w) in [
        ("mean", got.mean, want.mean),
        ("median", got.median, want.median),
        ("min", got.min, want.min),
        ("max", got.max, want.max),
        ("stddev", got.stddev, want.stddev),
    ] {
        if !close(g, w) {
            return Err(format!("{name}: got {g:?}, oracle {w:?} (n={})", values.len()));
        }
    }
    Ok(())
}

/// A column centred anywhere, spread over several orders of magnitude.
fn random_column(rng: &mut StdRng) -> Vec<f64> {
    let n = rng.random_range(1..=2000);
    let centre = rng.random_range(-1e4..1e4);
    let scale = 10f64.powf(rng.random_range(-3.0..4.0));
    (0..n).map(|_| centre + scale * rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn hundred_random_columns() {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let failures: Vec<String> = (0..100)
        .filter_map(|_| assert_matches(&random_column(&mut rng)).err())
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn cancellation_heavy_columns() {
    // Large values whose mean is near zero.
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..50 {
        let n = rng.random_range(2..500);
        let mut values: Vec<f64> = (0..n / 2).map(|_| rng.random_range(1e5..1e7)).collect();
        let mirror: Vec<f64> = values.iter().map(|v| -v + rng.random_range(-1.0..1.0)).collect();
        values.extend(mirror);
        assert_matches(&values).unwrap();
    }
}

#[test]
fn textbook_example() {
    assert_matches(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
    assert_eq!(oracle(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).stddev, 2.0);
}

proptest! {
    #[test]
    fn arbitrary_columns(values in prop::collection::vec(-1e9f64..1e9, 1..300)) {
        assert_matches(&values).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn invariants(values in prop::collection::vec(-1e6f64..1e6, 1..100), missing in 0usize..5) {
        let mut cells: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
        cells.extend(std::iter::repeat_n(String::new(), missing));
        let d = Dataset::from_records("p", ["v"], cells.iter().map(|c| [c.as_str()])).unwrap();
        let Summary::Numeric(p) = profile_column(&d, "v").unwrap().summary else {
            return Err(TestCaseError::fail("not numeric"));
        };
        prop_assert_eq!(p.count + p.missing, d.len());
        let s = p.stats.unwrap();
        prop_assert!(s.min <= s.median && s.median <= s.max);
        prop_assert!(s.min <= s.mean && s.mean <= s.max);
        prop_assert_eq!(profile_column(&d, "v").unwrap(), profile_column(&d, "v").unwrap());
    }

    #[test]
    fn text_profile_counts(cells in prop::collection::vec("[a-d]{1,2}|", 1..60)) {
        let d = Dataset::from_records("p", ["t"], cells.iter().map(|c| [c.as_str()])).unwrap();
        let Summary::Text(p) = profile_column(&d, "t").unwrap().summary else {
            return Err(TestCaseError::fail("not text"));
        };
        let present: Vec<&String> = cells.iter().filter(|c| !c.is_empty()).collect();
        prop_assert_eq!(p.count, present.len());
        prop_assert_eq!(p.missing, cells.len() - present.len());
        let mut counts = std::collections::BTreeMap::<&str, usize>::new();
        for c in &present {
            *counts.entry(c.as_str()).or_default() += 1;
        }
        prop_assert_eq!(p.distinct, counts.len());
        let mut expected: Vec<(String, usize)> = counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        expected.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        expected.truncate(5);
        prop_assert_eq!(p.top_values, expected);
    }
}
