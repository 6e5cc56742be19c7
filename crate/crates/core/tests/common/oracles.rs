//! Independent reference implementations shared by the detector suites.

use std::collections::BTreeMap;

use highlighter::model::AggregateFunction;
use highlighter::query::{execute_groupby, GroupBySpec, ResultSet};
use rand::rngs::StdRng;
use rand::Rng;
use serde::Deserialize;

use super::{col_id, grid_dataset, row_id};

pub type Grid = Vec<Vec<Option<f64>>>;

pub fn random_grid(rng: &mut StdRng) -> Grid {
    let h = rng.random_range(1..=10);
    let w = rng.random_range(1..=10);
    let coarse = rng.random_bool(0.5);
    (0..h)
        .map(|_| {
            (0..w)
                .map(|_| {
                    rng.random_bool(0.85).then(|| {
                        if coarse {
                            rng.random_range(0..6) as f64
                        } else {
                            rng.random_range(0..10_000) as f64 / 10.0
                        }
                    })
                })
                .collect()
        })
        .collect()
}

pub fn result(grid: &Grid) -> ResultSet {
    let (ds, cat) = grid_dataset(grid);
    execute_groupby(&ds, &cat, &GroupBySpec::new(&["A", "B"], "M", AggregateFunction::Sum)).unwrap()
}

pub fn transpose(grid: &Grid) -> Grid {
    let w = grid[0].len();
    (0..w).map(|j| grid.iter().map(|row| row[j]).collect()).collect()
}

/// Direct O(|A|^2 |B|) dominance over the rows of `grid` that have data,
/// returning (row index, score) for every reported dominator.
pub fn brute_dominance(grid: &Grid, floor: f64) -> Vec<(usize, f64)> {
    let rows: Vec<usize> = (0..grid.len()).filter(|&i| grid[i].iter().any(Option::is_some)).collect();
    if rows.len() < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for &c in &rows {
        let mut dominated = 0;
        for &p in &rows {
            if p == c {
                continue;
            }
            let mut shared = 0;
            let mut all_higher = true;
            for (a, b) in grid[c].iter().zip(&grid[p]) {
                if let (Some(x), Some(y)) = (a, b) {
                    shared += 1;
                    all_higher &= x > y;
                }
            }
            if shared > 0 && all_higher {
                dominated += 1;
            }
        }
        let score = dominated as f64 / (rows.len() - 1) as f64;
        if score == 1.0 || score >= floor {
            out.push((c, score));
        }
    }
    out
}

/// Present cells sorted by value, largest first, row-major among ties;
/// the first `k` as (row id, column id, value, rank).
pub fn brute_topk(grid: &Grid, k: usize) -> Vec<(String, String, f64, f64)> {
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    for (i, row) in grid.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if let Some(v) = v {
                cells.push((i, j, *v));
            }
        }
    }
    // stable sort keeps row-major order among equal values
    cells.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
    cells
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, (i, j, v))| (row_id(*i), col_id(*j), *v, (r + 1) as f64))
        .collect()
}

#[derive(Deserialize)]
pub struct Reference {
    pub x: Vec<f64>,
    pub w: f64,
    pub p: f64,
}

/// Samples with W and p recorded from an independent AS R94 implementation.
pub fn shapiro_references() -> BTreeMap<String, Reference> {
    let text = include_str!("../data/shapiro_reference.json");
    serde_json::from_str(text).unwrap()
}

/// tau-b from an O(n^2) walk over all pairs.
pub fn brute_kendall(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tx += 1;
            }
            if dy == 0.0 {
                ty += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    conc += 1;
                } else {
                    disc += 1;
                }
            }
        }
    }
    let total = (n * (n - 1) / 2) as i64;
    let (a, b) = (total - tx, total - ty);
    if a == 0 || b == 0 {
        return None;
    }
    Some((conc - disc) as f64 / (a as f64 * b as f64).sqrt())
}
