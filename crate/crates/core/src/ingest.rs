//! CSV ingestion: fact table plus optional dimension lookup tables, joined
//! through their keys into a [`Dataset`] and a [`Catalog`] of characters.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::model::{
    Catalog, Character, CharacterRegistry, CharacterType, Dataset, Fact, Feature, FeatureKind,
    MeasureKind, MeasureType, ModelError, Schema, Value,
};

/// Distinct-value ratio at or below which a text column reads as a dimension.
pub const DIMENSION_RATIO_THRESHOLD: f64 = 0.5;
/// Text columns with more distinct values than this are never dimensions.
pub const DIMENSION_MAX_DISTINCT: usize = 1000;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read `{}`: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV `{}` at line {line}{}: {reason}", path.display(), column.as_deref().map(|c| format!(", column `{c}`")).unwrap_or_default())]
    MalformedCsv { path: PathBuf, line: u64, column: Option<String>, reason: String },
    #[error("line {line}: `{column}` references unknown {character_type} id `{id}`")]
    JoinMiss { line: u64, column: String, character_type: String, id: String },
    #[error("derived measure `{measure}`: {reason}")]
    BadDerivation { measure: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl IngestError {
    /// Configuration problems, as opposed to problems with the data files.
    pub fn is_config_error(&self) -> bool {
        matches!(self, IngestError::Config(_) | IngestError::BadDerivation { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ColumnRole {
    Measure {
        #[serde(default)]
        unit: String,
    },
    #[serde(rename_all = "camelCase")]
    Dimension { character_type: String },
    #[serde(rename_all = "camelCase")]
    Datetime {
        #[serde(default)]
        character_type: Option<String>,
    },
    Descriptor,
    Identifier,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DimensionTableConfig {
    pub path: PathBuf,
    pub character_type: String,
    pub join_key: String,
    #[serde(default)]
    pub description_column: Option<String>,
    #[serde(default)]
    pub property_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedMeasureConfig {
    pub name: String,
    pub expression: String,
    #[serde(default)]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetConfig {
    pub fact_table: PathBuf,
    pub columns: BTreeMap<String, ColumnRole>,
    #[serde(default)]
    pub dimension_tables: Vec<DimensionTableConfig>,
    #[serde(default)]
    pub derived_measures: Vec<DerivedMeasureConfig>,
    /// Unknown dimension keys become flat characters (with a warning)
    /// instead of failing the load.
    #[serde(default)]
    pub allow_dangling_keys: bool,
    /// Skip malformed fact rows (with a warning) instead of failing.
    #[serde(default)]
    pub lenient: bool,
}

impl DatasetConfig {
    /// Resolves relative table paths against `base`.
    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.fact_table);
        for t in &mut self.dimension_tables {
            fix(&mut t.path);
        }
    }

    fn character_type_of(&self, column: &str, role: &ColumnRole) -> Option<String> {
        match role {
            ColumnRole::Dimension { character_type } => Some(character_type.clone()),
            ColumnRole::Datetime { character_type } => {
                Some(character_type.clone().unwrap_or_else(|| column.to_string()))
            }
            _ => None,
        }
    }

    /// Structural checks that need no file access: measures and dimensions
    /// exist, dimension tables are unique and used, temporality agrees.
    pub fn check(&self) -> Result<(), IngestError> {
        let measures = self.columns.values().filter(|r| matches!(r, ColumnRole::Measure { .. })).count();
        if measures == 0 {
            return Err(IngestError::Config("at least one measure column is required".into()));
        }
        let dims: Vec<(String, String)> = self
            .columns
            .iter()
            .filter_map(|(c, r)| self.character_type_of(c, r).map(|t| (c.clone(), t)))
            .collect();
        if dims.is_empty() {
            return Err(IngestError::Config("at least one dimension column is required".into()));
        }
        let mut seen = BTreeSet::new();
        for t in &self.dimension_tables {
            if !seen.insert(&t.character_type) {
                return Err(IngestError::Config(format!(
                    "two dimension tables declare character type `{}`",
                    t.character_type
                )));
            }
            if !dims.iter().any(|(_, ty)| *ty == t.character_type) {
                return Err(IngestError::Config(format!(
                    "dimension table `{}` declares character type `{}` that no column uses",
                    t.path.display(),
                    t.character_type
                )));
            }
        }
        // a character type shared by two columns must agree on temporality
        let mut temporal: BTreeMap<&str, bool> = BTreeMap::new();
        for (column, t) in &dims {
            let is_time = matches!(self.columns[column], ColumnRole::Datetime { .. });
            if temporal.insert(t.as_str(), is_time).is_some_and(|prev| prev != is_time) {
                return Err(IngestError::Config(format!(
                    "character type `{t}` is used by both datetime and dimension columns"
                )));
            }
        }
        let mut names: BTreeSet<&str> = self.columns.keys().map(String::as_str).collect();
        for d in &self.derived_measures {
            if !names.insert(&d.name) {
                return Err(IngestError::Config(format!("derived measure `{}` clashes with a column", d.name)));
            }
        }
        Ok(())
    }
}

/// The output of ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub catalog: Catalog,
    pub warnings: Vec<String>,
}

/// Parses ISO-8601 dates and timestamps to epoch seconds. Accepts RFC 3339,
/// `YYYY-MM-DDTHH:MM:SS`, `YYYY-MM-DD HH:MM:SS`, `YYYY-MM-DD` and `YYYY-MM`.
pub fn parse_datetime(text: &str) -> Option<i64> {
    let s = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp());
    }
    if s.len() == 7 {
        if let Ok(d) = NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d") {
            return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp());
        }
    }
    None
}

/// Parses a finite number; `None` for anything else.
pub fn parse_number(text: &str) -> Option<f64> {
    let s = text.trim();
    // Rust accepts "inf"/"NaN"; those are not data
    if s.is_empty() || s.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

struct Table {
    headers: Vec<String>,
    /// (line number, fields)
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let malformed = |line: u64, reason: String| IngestError::MalformedCsv {
        path: path.to_path_buf(),
        line,
        column: None,
        reason,
    };
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(Table { headers, rows })
}

fn column_index(table: &Table, path: &Path, column: &str) -> Result<usize, IngestError> {
    table.headers.iter().position(|h| h == column).ok_or_else(|| {
        IngestError::Config(format!("column `{column}` not found in `{}`", path.display()))
    })
}

fn load_dimension_table(
    cfg: &DimensionTableConfig,
    temporal: bool,
    registry: &mut CharacterRegistry,
) -> Result<(), IngestError> {
    let table = read_table(&cfg.path)?;
    let key = column_index(&table, &cfg.path, &cfg.join_key)?;
    let desc = match &cfg.description_column {
        Some(c) => column_index(&table, &cfg.path, c)?,
        None => key,
    };
    let props: Vec<(String, usize)> = cfg
        .property_columns
        .iter()
        .map(|c| column_index(&table, &cfg.path, c).map(|i| (c.clone(), i)))
        .collect::<Result<_, _>>()?;

    for (line, row) in &table.rows {
        if row.len() != table.headers.len() {
            return Err(IngestError::MalformedCsv {
                path: cfg.path.clone(),
                line: *line,
                column: None,
                reason: format!("expected {} fields, found {}", table.headers.len(), row.len()),
            });
        }
    }

    let mut ctype = CharacterType::new(&cfg.character_type);
    ctype.temporal = temporal;
    for (name, idx) in &props {
        let numeric = table
            .rows
            .iter()
            .map(|(_, r)| r[*idx].trim())
            .filter(|s| !s.is_empty())
            .all(|s| parse_number(s).is_some());
        let kind = if numeric { FeatureKind::Numeric } else { FeatureKind::Descriptor };
        ctype.properties.push(Feature::new(name, kind));
    }
    registry.add_type(ctype.clone());

    for (ordinal, (line, row)) in table.rows.iter().enumerate() {
        let id = row[key].trim().to_string();
        let epoch = if temporal {
            Some(parse_datetime(&id).ok_or_else(|| IngestError::MalformedCsv {
                path: cfg.path.clone(),
                line: *line,
                column: Some(cfg.join_key.clone()),
                reason: format!("`{id}` is not an ISO-8601 date"),
            })?)
        } else {
            None
        };
        let mut properties = BTreeMap::new();
        for ((name, idx), feature) in props.iter().zip(&ctype.properties) {
            let raw = row[*idx].trim();
            let v = if raw.is_empty() {
                Value::Null
            } else if feature.kind == FeatureKind::Numeric {
                Value::Number(parse_number(raw).unwrap_or_default())
            } else {
                Value::Text(raw.to_string())
            };
            properties.insert(name.clone(), v);
        }
        registry.insert(Character {
            character_type: cfg.character_type.clone(),
            id,
            description: row[desc].trim().to_string(),
            properties,
            epoch,
            ordinal: Some(ordinal),
        })?;
    }
    Ok(())
}

/// Loads the fact table, joins the dimension tables and evaluates derived
/// measures.
pub fn load_dataset(config: &DatasetConfig) -> Result<LoadedDataset, IngestError> {
    config.check()?;
    let mut warnings = Vec::new();

    let derived: Vec<(DerivedMeasureConfig, Expr)> = config
        .derived_measures
        .iter()
        .map(|d| {
            Expr::parse(&d.expression)
                .map(|e| (d.clone(), e))
                .map_err(|e: ExprError| IngestError::BadDerivation { measure: d.name.clone(), reason: e.to_string() })
        })
        .collect::<Result<_, _>>()?;

    let mut known_measures: BTreeSet<String> = config
        .columns
        .iter()
        .filter(|(_, r)| matches!(r, ColumnRole::Measure { .. }))
        .map(|(c, _)| c.clone())
        .collect();
    for (d, e) in &derived {
        if let Some(r) = e.references().into_iter().find(|r| !known_measures.contains(r)) {
            return Err(IngestError::BadDerivation {
                measure: d.name.clone(),
                reason: format!("unknown measure `{r}`"),
            });
        }
        known_measures.insert(d.name.clone());
    }

    let table = read_table(&config.fact_table)?;
    for column in config.columns.keys() {
        column_index(&table, &config.fact_table, column)?;
    }

    let mut registry = CharacterRegistry::new();
    let mut dimensions = BTreeMap::new();
    let mut table_backed = BTreeSet::new();
    for (column, role) in &config.columns {
        if let Some(t) = config.character_type_of(column, role) {
            dimensions.insert(column.clone(), t.clone());
            let temporal = matches!(role, ColumnRole::Datetime { .. });
            if registry.character_type(&t).is_none() {
                match config.dimension_tables.iter().find(|d| d.character_type == t) {
                    Some(dt) => {
                        load_dimension_table(dt, temporal, &mut registry)?;
                        table_backed.insert(t.clone());
                    }
                    None => {
                        let mut ct = CharacterType::new(&t);
                        ct.temporal = temporal;
                        registry.add_type(ct);
                    }
                }
            }
        }
    }

    // schema: configured columns in header order, then derived measures
    let mut features = Vec::new();
    let mut measures = BTreeMap::new();
    let mut layout: Vec<(usize, String, ColumnRole)> = Vec::new();
    for (idx, header) in table.headers.iter().enumerate() {
        let Some(role) = config.columns.get(header) else { continue };
        let kind = match role {
            ColumnRole::Measure { unit } => {
                measures.insert(header.clone(), MeasureType::base(header, unit));
                FeatureKind::Numeric
            }
            ColumnRole::Dimension { .. } | ColumnRole::Identifier => FeatureKind::Identifier,
            ColumnRole::Datetime { .. } => FeatureKind::DateTime,
            ColumnRole::Descriptor => FeatureKind::Descriptor,
            ColumnRole::Ignore => continue,
        };
        features.push(Feature::new(header, kind));
        layout.push((idx, header.clone(), role.clone()));
    }
    for (d, _) in &derived {
        let unit = d.unit.clone().unwrap_or_default();
        measures.insert(
            d.name.clone(),
            MeasureType { name: d.name.clone(), unit, kind: MeasureKind::Derived { expression: d.expression.clone() } },
        );
        features.push(Feature::new(&d.name, FeatureKind::Numeric));
    }
    let schema_name = config
        .fact_table
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "facts".into());
    let schema = Schema::new(schema_name, features)?;

    let mut facts = Vec::with_capacity(table.rows.len());
    'rows: for (line, row) in &table.rows {
        if row.len() != table.headers.len() {
            let err = IngestError::MalformedCsv {
                path: config.fact_table.clone(),
                line: *line,
                column: None,
                reason: format!("expected {} fields, found {}", table.headers.len(), row.len()),
            };
            if config.lenient {
                warnings.push(format!("skipped: {err}"));
                continue;
            }
            return Err(err);
        }
        let mut fact = Fact::default();
        for (idx, header, role) in &layout {
            let raw = row[*idx].trim();
            let value = if raw.is_empty() {
                Value::Null
            } else {
                match role {
                    ColumnRole::Measure { .. } => match parse_number(raw) {
                        Some(x) => Value::Number(x),
                        None => {
                            let err = IngestError::MalformedCsv {
                                path: config.fact_table.clone(),
                                line: *line,
                                column: Some(header.clone()),
                                reason: format!("`{raw}` is not a number"),
                            };
                            if config.lenient {
                                warnings.push(format!("skipped: {err}"));
                                continue 'rows;
                            }
                            return Err(err);
                        }
                    },
                    ColumnRole::Datetime { .. } => match parse_datetime(raw) {
                        Some(epoch) => Value::DateTime { iso: raw.to_string(), epoch },
                        None => {
                            let err = IngestError::MalformedCsv {
                                path: config.fact_table.clone(),
                                line: *line,
                                column: Some(header.clone()),
                                reason: format!("`{raw}` is not an ISO-8601 date"),
                            };
                            if config.lenient {
                                warnings.push(format!("skipped: {err}"));
                                continue 'rows;
                            }
                            return Err(err);
                        }
                    },
                    _ => Value::Text(raw.to_string()),
                }
            };
            fact.set(header.clone(), value);
        }

        for (column, t) in &dimensions {
            let Some(id) = fact.get(column).key().map(str::to_string) else { continue };
            if registry.contains(t, &id) {
                continue;
            }
            if table_backed.contains(t) && !config.allow_dangling_keys {
                return Err(IngestError::JoinMiss {
                    line: *line,
                    column: column.clone(),
                    character_type: t.clone(),
                    id,
                });
            }
            if table_backed.contains(t) {
                warnings.push(format!("line {line}: dangling {t} key `{id}` kept as a flat character"));
            }
            let mut c = Character::flat(t, &id);
            if let Value::DateTime { epoch, .. } = fact.get(column) {
                c.epoch = Some(*epoch);
            }
            registry.insert(c)?;
        }

        for (d, e) in &derived {
            let v = e.eval(&|name: &str| fact.get(name).as_f64());
            fact.set(d.name.clone(), v.map_or(Value::Null, Value::Number));
        }
        facts.push(fact);
    }

    Ok(LoadedDataset {
        dataset: Dataset::new(schema, facts),
        catalog: Catalog { measures, dimensions, registry },
        warnings,
    })
}

/// Role suggested for a raw column by [`infer_feature_kinds`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suggestion {
    Numeric,
    DateTime,
    Dimension,
    Descriptor,
}

impl std::fmt::Display for Suggestion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Suggestion::Numeric => "measure",
            Suggestion::DateTime => "datetime",
            Suggestion::Dimension => "dimension",
            Suggestion::Descriptor => "descriptor",
        })
    }
}

/// Suggests a role from sampled values. Empty strings are ignored.
///
/// Text columns become dimensions when their normalised cardinality
/// `(distinct - 1) / (n - 1)` is at most [`DIMENSION_RATIO_THRESHOLD`] and
/// they have no more than [`DIMENSION_MAX_DISTINCT`] distinct values.
pub fn infer_feature_kind(values: &[String]) -> Suggestion {
    let present: Vec<&str> = values.iter().map(|v| v.trim()).filter(|v| !v.is_empty()).collect();
    if present.is_empty() {
        return Suggestion::Descriptor;
    }
    if present.iter().all(|v| parse_number(v).is_some()) {
        return Suggestion::Numeric;
    }
    if present.iter().all(|v| parse_datetime(v).is_some()) {
        return Suggestion::DateTime;
    }
    let distinct = present.iter().collect::<BTreeSet<_>>().len();
    let n = present.len();
    let ratio = if n == 1 { 1.0 } else { (distinct - 1) as f64 / (n - 1) as f64 };
    if ratio <= DIMENSION_RATIO_THRESHOLD && distinct <= DIMENSION_MAX_DISTINCT {
        Suggestion::Dimension
    } else {
        Suggestion::Descriptor
    }
}

pub fn infer_feature_kinds(columns: &[(String, Vec<String>)]) -> Vec<(String, Suggestion)> {
    columns.iter().map(|(name, values)| (name.clone(), infer_feature_kind(values))).collect()
}

/// Reads up to `max_rows` rows of a CSV file column-wise.
pub fn sample_columns(path: &Path, max_rows: usize) -> Result<Vec<(String, Vec<String>)>, IngestError> {
    let table = read_table(path)?;
    let mut cols: Vec<(String, Vec<String>)> =
        table.headers.iter().map(|h| (h.clone(), Vec::new())).collect();
    for (_, row) in table.rows.iter().take(max_rows) {
        for (i, (_, values)) in cols.iter_mut().enumerate() {
            values.push(row.get(i).cloned().unwrap_or_default());
        }
    }
    Ok(cols)
}
