#![allow(dead_code)]

pub mod oracles;

use std::path::PathBuf;

use highlighter::model::{Catalog, Character, CharacterType, Dataset, Feature, FeatureKind, MeasureType, Schema, Value};
use highlighter::pipeline::{load_config, load_query, run, AppConfig, Run};
use highlighter::query::GroupBySpec;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/table1")
}

pub fn table1_config() -> AppConfig {
    load_config(&fixture_dir().join("config.json")).unwrap()
}

pub fn table1_query() -> GroupBySpec {
    load_query(&fixture_dir().join("query.json")).unwrap()
}

pub fn table1_run() -> Run {
    run(&table1_config(), &table1_query(), None).unwrap()
}

/// A dataset with one fact per present grid cell: `A` (rows) and `B`
/// (columns) are flat dimensions whose ids sort in index order.
pub fn grid_dataset(grid: &[Vec<Option<f64>>]) -> (Dataset, Catalog) {
    let schema = Schema::new(
        "grid",
        vec![
            Feature::new("A", FeatureKind::Identifier),
            Feature::new("B", FeatureKind::Identifier),
            Feature::new("M", FeatureKind::Numeric),
        ],
    )
    .unwrap();
    let mut catalog = Catalog::default();
    catalog.measures.insert("M".into(), MeasureType::base("M", "u"));
    for t in ["A", "B"] {
        catalog.dimensions.insert(t.into(), t.into());
        catalog.registry.add_type(CharacterType::new(t));
    }
    let cols = grid.first().map_or(0, Vec::len);
    for i in 0..grid.len() {
        catalog.registry.insert(Character::flat("A", row_id(i))).unwrap();
    }
    for j in 0..cols {
        catalog.registry.insert(Character::flat("B", col_id(j))).unwrap();
    }
    let mut facts = Vec::new();
    for (i, row) in grid.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if let Some(v) = v {
                facts.push(
                    [
                        ("A", Value::Text(row_id(i))),
                        ("B", Value::Text(col_id(j))),
                        ("M", Value::Number(*v)),
                    ]
                    .into_iter()
                    .collect(),
                );
            }
        }
    }
    (Dataset::new(schema, facts), catalog)
}

pub fn row_id(i: usize) -> String {
    format!("a{i:02}")
}

pub fn col_id(j: usize) -> String {
    format!("b{j:02}")
}
