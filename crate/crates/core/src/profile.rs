//! Per-column descriptive statistics and a suggested role for each column.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use crate::ingest::{infer_feature_kind, parse_number, sample_columns, IngestError, Suggestion};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnProfile {
    pub name: String,
    /// Non-empty values.
    pub count: usize,
    pub distinct: usize,
    /// Numeric summaries, for columns whose values all parse as numbers.
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub suggested: Suggestion,
}

pub fn profile_column(name: &str, values: &[String]) -> ColumnProfile {
    let present: Vec<&str> = values.iter().map(|v| v.trim()).filter(|v| !v.is_empty()).collect();
    let distinct = present.iter().collect::<BTreeSet<_>>().len();
    let numbers: Option<Vec<f64>> = present.iter().map(|v| parse_number(v)).collect();
    let numbers = numbers.filter(|n| !n.is_empty());
    let (min, max, mean) = match &numbers {
        Some(n) => (
            n.iter().copied().reduce(f64::min),
            n.iter().copied().reduce(f64::max),
            Some(n.iter().sum::<f64>() / n.len() as f64),
        ),
        None => (None, None, None),
    };
    ColumnProfile {
        name: name.to_string(),
        count: present.len(),
        distinct,
        min,
        max,
        mean,
        suggested: infer_feature_kind(values),
    }
}

pub fn profile_table(path: &Path) -> Result<Vec<ColumnProfile>, IngestError> {
    Ok(sample_columns(path, usize::MAX)?.iter().map(|(name, values)| profile_column(name, values)).collect())
}

/// Fixed-width text table, one row per column.
pub fn render_profile(profiles: &[ColumnProfile]) -> String {
    let num = |x: Option<f64>| x.map_or_else(|| "-".to_string(), crate::highlight::format_value);
    let header = ["feature", "count", "min", "max", "mean", "distinct", "suggested"].map(String::from);
    let rows: Vec<[String; 7]> = profiles
        .iter()
        .map(|p| {
            [
                p.name.clone(),
                p.count.to_string(),
                num(p.min),
                num(p.max),
                num(p.mean),
                p.distinct.to_string(),
                p.suggested.to_string(),
            ]
        })
        .collect();
    let mut widths = header.clone().map(|h| h.len());
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String; 7]| {
        let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&header);
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}
