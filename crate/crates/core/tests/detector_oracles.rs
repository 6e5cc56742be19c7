mod common;

use std::collections::BTreeMap;

use common::oracles::{brute_dominance, brute_topk, random_grid, result, transpose, Grid};
use common::grid_dataset;
use highlighter::detectors::{
    detect_correlation, detect_distribution, detect_dominance, detect_mega_contributors, detect_topk, run_all,
    DetectorConfig, DetectorKind,
};
use highlighter::highlight::{serialize_highlights, validate_highlight, HighlightCatalog, HolisticHighlight};
use highlighter::model::{AggregateFunction, MeasureType};
use highlighter::query::{execute_groupby, GroupBySpec};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

fn detail_indices(h: &HolisticHighlight) -> Vec<(usize, f64)> {
    h.details
        .iter()
        .map(|d| (d.characters[0].character.id[1..].parse().unwrap(), d.score))
        .collect()
}

#[test]
fn dominance_matches_brute_force_on_200_grids() {
    let mut rng = StdRng::seed_from_u64(0xd0d0);
    let cfg = DetectorConfig::default();
    let mut with_details = 0;
    for _ in 0..200 {
        let grid = random_grid(&mut rng);
        if !grid.iter().flatten().any(Option::is_some) {
            continue;
        }
        let rs = result(&grid);
        for (axis, g) in [(0, grid.clone()), (1, transpose(&grid))] {
            let expected = brute_dominance(&g, cfg.partial_dominance_floor);
            match detect_dominance(&rs, axis, &cfg) {
                Ok(h) => {
                    assert_eq!(detail_indices(&h), expected, "axis {axis} grid {grid:?}");
                    with_details += 1;
                }
                Err(_) => assert!(expected.is_empty(), "axis {axis} grid {grid:?}"),
            }
        }
    }
    assert!(with_details > 20, "too few informative cases: {with_details}");
}

#[test]
fn topk_matches_sort_on_200_grids() {
    let mut rng = StdRng::seed_from_u64(0x70b);
    for _ in 0..200 {
        let grid = random_grid(&mut rng);
        let k = rng.random_range(1..=12);
        let expected = brute_topk(&grid, k);
        if expected.is_empty() {
            continue;
        }
        let cfg = DetectorConfig { k, ..Default::default() };
        let h = detect_topk(&result(&grid), &cfg).unwrap();
        let got: Vec<_> = h
            .details
            .iter()
            .map(|d| {
                (d.characters[0].character.id.clone(), d.characters[1].character.id.clone(), d.measure_value, d.score)
            })
            .collect();
        assert_eq!(got, expected);
        assert_eq!(h.model, format!("Top-k(k={})", expected.len()));
    }
}

fn nonneg_grid() -> impl Strategy<Value = Grid> {
    (1usize..=8, 1usize..=8).prop_flat_map(|(h, w)| {
        prop::collection::vec(prop::collection::vec(prop::option::weighted(0.85, 0u32..500), w), h)
            .prop_map(|g| g.into_iter().map(|r| r.into_iter().map(|v| v.map(f64::from)).collect()).collect())
    })
}

fn has_positive(grid: &Grid) -> bool {
    grid.iter().flatten().flatten().any(|v| *v > 0.0)
}

/// What must survive rescaling: details' characters and ranks, models.
fn shape(h: &HolisticHighlight) -> (String, String, Vec<(Vec<String>, String)>) {
    let details = h
        .details
        .iter()
        .map(|d| {
            let ids = d.characters.iter().map(|c| c.character.id.clone()).collect();
            let score = if d.score_type == "rank" { d.score.to_string() } else { String::new() };
            (ids, score)
        })
        .collect();
    (h.provenance.id.clone(), h.model.clone(), details)
}

proptest! {
    #[test]
    fn mega_contributor_shares_are_a_partition(grid in nonneg_grid(), threshold in 0.05f64..0.95) {
        prop_assume!(has_positive(&grid));
        let rs = result(&grid);
        let cfg = DetectorConfig { mega_contributor_threshold: threshold, ..Default::default() };
        for axis in 0..2 {
            let h = detect_mega_contributors(&rs, axis, &cfg).unwrap();
            let total = rs.grand_total().unwrap();
            let sum: f64 = rs.marginals(axis).unwrap().iter().flatten().map(|m| m / total).sum();
            prop_assert!(sum <= 1.0 + 1e-9);
            prop_assert!(h.details.len() <= (1.0 / threshold).floor() as usize);
            for d in &h.details {
                prop_assert!(d.score >= threshold);
            }
        }
    }

    #[test]
    fn argmax_results_survive_positive_scaling(grid in nonneg_grid(), factor in 0.01f64..1000.0) {
        prop_assume!(has_positive(&grid));
        let scaled: Grid = grid.iter().map(|r| r.iter().map(|v| v.map(|x| x * factor)).collect()).collect();
        let cfg = DetectorConfig::only(&DetectorKind::ALL);
        let run = |g: &Grid| {
            let (ds, cat) = grid_dataset(g);
            let rs = execute_groupby(&ds, &cat, &GroupBySpec::new(&["A", "B"], "M", AggregateFunction::Sum)).unwrap();
            let mut out = Vec::new();
            for axis in 0..2 {
                out.extend(detect_dominance(&rs, axis, &cfg).ok());
                out.extend(detect_mega_contributors(&rs, axis, &cfg).ok());
            }
            out.extend(detect_topk(&rs, &cfg).ok());
            out
        };
        let (a, b) = (run(&grid), run(&scaled));
        prop_assert_eq!(a.iter().map(shape).collect::<Vec<_>>(), b.iter().map(shape).collect::<Vec<_>>());
        for (x, y) in a.iter().zip(&b) {
            if x.score_type == "share of total" || x.score_type == "percentage of dominated peers" {
                prop_assert!((x.score - y.score).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn every_emitted_highlight_validates_and_output_is_deterministic(grid in nonneg_grid()) {
        prop_assume!(has_positive(&grid));
        let (ds, cat) = grid_dataset(&grid);
        let rs = execute_groupby(&ds, &cat, &GroupBySpec::new(&["A", "B"], "M", AggregateFunction::Sum)).unwrap();
        let cfg = DetectorConfig::only(&DetectorKind::ALL);
        let catalog = HighlightCatalog::default();
        let first = run_all(&ds, &cat, &rs, &cfg, None);
        for h in &first.highlights {
            let report = validate_highlight(h, &catalog);
            prop_assert!(report.is_empty(), "{:?}", report);
        }
        let second = run_all(&ds, &cat, &rs, &cfg, None);
        prop_assert_eq!(
            serialize_highlights(&first.highlights, &first.diagnostics, &catalog).unwrap(),
            serialize_highlights(&second.highlights, &second.diagnostics, &catalog).unwrap()
        );
    }
}

#[test]
fn single_grouper_runs_without_dominance() {
    let grid: Grid = vec![vec![Some(3.0), Some(1.0)], vec![Some(2.0), Some(2.0)], vec![Some(9.0), None]];
    let (ds, cat) = grid_dataset(&grid);
    let rs = execute_groupby(&ds, &cat, &GroupBySpec::new(&["A"], "M", AggregateFunction::Sum)).unwrap();
    let out = run_all(&ds, &cat, &rs, &DetectorConfig::only(&DetectorKind::ALL), None);
    assert!(out.highlights.iter().all(|h| h.highlight_type != "Dominance"));
    assert!(out.highlights.iter().any(|h| h.highlight_type == "Mega-contributor"));
    assert!(out.diagnostics.iter().any(|d| d.detector == "dominance"));
}

#[test]
fn nothing_enabled_means_nothing_reported() {
    let grid: Grid = vec![vec![Some(3.0), Some(1.0)], vec![Some(2.0), Some(2.0)]];
    let (ds, cat) = grid_dataset(&grid);
    let rs = execute_groupby(&ds, &cat, &GroupBySpec::new(&["A", "B"], "M", AggregateFunction::Sum)).unwrap();
    let out = run_all(&ds, &cat, &rs, &DetectorConfig::only(&[]), None);
    assert!(out.highlights.is_empty() && out.diagnostics.is_empty());
}

#[test]
fn non_sum_results_skip_share_detectors() {
    let grid: Grid = vec![vec![Some(3.0), Some(1.0)], vec![Some(2.0), Some(2.0)]];
    let (ds, cat) = grid_dataset(&grid);
    let rs = execute_groupby(&ds, &cat, &GroupBySpec::new(&["A", "B"], "M", AggregateFunction::Max)).unwrap();
    assert!(detect_mega_contributors(&rs, 0, &DetectorConfig::default()).is_err());
    // dominance still applies; the detail value is the mean of present cells
    let h = detect_dominance(&rs, 0, &DetectorConfig::default()).unwrap_err();
    assert!(h.contains("no character"), "{h}");
}

fn brute_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += ((x[j] - x[i]) * (y[j] - y[i])).signum();
        }
    }
    s / (n * (n - 1) / 2) as f64
}

#[test]
fn moderately_negative_correlation_fixture() {
    // search permutations of 0..8 for one with tau = -0.5 by pair enumeration
    let x: Vec<f64> = (0..8).map(f64::from).collect();
    let mut rng = StdRng::seed_from_u64(5);
    let y = loop {
        let mut y = x.clone();
        for i in (1..y.len()).rev() {
            y.swap(i, rng.random_range(0..=i));
        }
        if brute_tau(&x, &y) == -0.5 {
            break y;
        }
    };
    let a = MeasureType::base("Sales", "EUR");
    let b = MeasureType::base("Returns", "EUR");
    let h = detect_correlation(&x, &y, (&a, &b), &DetectorConfig::default()).unwrap();
    assert_eq!(h.model, "Moderately Negatively Significant");
    assert_eq!(h.score, -0.5);
}

#[derive(Deserialize)]
struct Reference {
    x: Vec<f64>,
}

#[test]
fn bell_shaped_sample_reads_as_normal() {
    let refs: BTreeMap<String, Reference> =
        serde_json::from_str(include_str!("data/shapiro_reference.json")).unwrap();
    let sample = &refs["bell_n200"].x;
    assert_eq!(sample.len(), 200);
    let h = detect_distribution(sample, &MeasureType::base("Sales", "EUR"), &DetectorConfig::default()).unwrap();
    assert_eq!((h.model.as_str(), h.algorithm.as_str()), ("Normal", "Shapiro-Wilk"));
}
