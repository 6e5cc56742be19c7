//! Group-by aggregate queries over a dataset: filtered facts folded into a
//! dense grid of cells over one or two character axes, with marginals.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::parse_datetime;
use crate::model::{
    resolve_character, AggregateFunction, Catalog, Character, Dataset, Fact, FeatureKind,
    MeasureType, Value,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{0}` is not numeric and cannot be aggregated")]
    NonNumericMeasure(String),
    #[error("feature `{0}` is not a dimension")]
    NotADimension(String),
    #[error("group-by needs at least one grouper")]
    NoGroupers,
    #[error("grouper `{0}` listed twice")]
    DuplicateGrouper(String),
    #[error("{0} groupers requested; only 1 or 2 are supported")]
    UnsupportedGrouperArity(usize),
    #[error("filter on `{feature}`: {reason}")]
    BadFilter { feature: String, reason: String },
    #[error("marginals are undefined for {0}")]
    MarginalsUndefinedForAggregate(AggregateFunction),
    #[error("axis {0} does not exist in this result")]
    AxisOutOfRange(usize),
    #[error("character `{0}` is not on the fixed axis")]
    CharacterNotOnAxis(String),
    #[error("slicing needs a two-grouper result")]
    SliceNeedsTwoAxes,
    #[error("fact references unregistered character `{id}` of type `{character_type}`")]
    UnregisteredCharacter { character_type: String, id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=", alias = "≠", alias = "<>")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
    #[serde(rename = "in")]
    In,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Constant {
    Number(f64),
    Text(String),
    List(Vec<Constant>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub feature: String,
    pub op: FilterOp,
    pub value: Constant,
}

impl Filter {
    pub fn new(feature: impl Into<String>, op: FilterOp, value: Constant) -> Self {
        Self { feature: feature.into(), op, value }
    }

    fn check(&self, kind: FeatureKind) -> Result<(), QueryError> {
        let bad = |reason: &str| QueryError::BadFilter { feature: self.feature.clone(), reason: reason.into() };
        let scalar_ok = |c: &Constant| match (kind, c) {
            (FeatureKind::Numeric, Constant::Number(_)) => true,
            (FeatureKind::DateTime, Constant::Text(t)) => parse_datetime(t).is_some(),
            (FeatureKind::Identifier | FeatureKind::Descriptor, Constant::Text(_)) => true,
            _ => false,
        };
        match (&self.op, &self.value) {
            (FilterOp::In, Constant::List(items)) => {
                if items.iter().all(scalar_ok) {
                    Ok(())
                } else {
                    Err(bad("list item does not match the feature type"))
                }
            }
            (FilterOp::In, _) => Err(bad("`in` needs a list")),
            (_, Constant::List(_)) => Err(bad("only `in` accepts a list")),
            (_, c) if scalar_ok(c) => Ok(()),
            _ => Err(bad("constant does not match the feature type")),
        }
    }

    /// Null values never match.
    pub fn matches(&self, fact: &Fact) -> bool {
        let v = fact.get(&self.feature);
        match (&self.op, &self.value) {
            (FilterOp::In, Constant::List(items)) => {
                items.iter().any(|c| compare(v, c) == Some(Ordering::Equal))
            }
            (op, c) => match compare(v, c) {
                None => false,
                Some(ord) => match op {
                    FilterOp::Eq => ord == Ordering::Equal,
                    FilterOp::Ne => ord != Ordering::Equal,
                    FilterOp::Lt => ord == Ordering::Less,
                    FilterOp::Le => ord != Ordering::Greater,
                    FilterOp::Gt => ord == Ordering::Greater,
                    FilterOp::Ge => ord != Ordering::Less,
                    FilterOp::In => false,
                },
            },
        }
    }
}

fn compare(v: &Value, c: &Constant) -> Option<Ordering> {
    match (v, c) {
        (Value::Number(a), Constant::Number(b)) => a.partial_cmp(b),
        (Value::Text(a), Constant::Text(b)) => Some(a.as_str().cmp(b.as_str())),
        (Value::DateTime { epoch, .. }, Constant::Text(b)) => Some(epoch.cmp(&parse_datetime(b)?)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GroupBySpec {
    #[serde(default)]
    pub filters: Vec<Filter>,
    pub group_by: Vec<String>,
    pub measure: String,
    pub agg: AggregateFunction,
}

impl GroupBySpec {
    pub fn new(group_by: &[&str], measure: &str, agg: AggregateFunction) -> Self {
        Self {
            filters: Vec::new(),
            group_by: group_by.iter().map(|s| s.to_string()).collect(),
            measure: measure.to_string(),
            agg,
        }
    }

    pub fn with_filter(mut self, filter: Filter) -> Self {
        self.filters.push(filter);
        self
    }

    pub fn validate(&self, dataset: &Dataset, catalog: &Catalog) -> Result<(), QueryError> {
        match self.group_by.len() {
            0 => return Err(QueryError::NoGroupers),
            1 | 2 => {}
            n => return Err(QueryError::UnsupportedGrouperArity(n)),
        }
        if self.group_by.len() == 2 && self.group_by[0] == self.group_by[1] {
            return Err(QueryError::DuplicateGrouper(self.group_by[0].clone()));
        }
        let schema = &dataset.schema;
        for g in &self.group_by {
            schema.feature(g).ok_or_else(|| QueryError::UnknownFeature(g.clone()))?;
            if catalog.dimension_type(g).is_none() {
                return Err(QueryError::NotADimension(g.clone()));
            }
        }
        let m = schema.feature(&self.measure).ok_or_else(|| QueryError::UnknownFeature(self.measure.clone()))?;
        if m.kind != FeatureKind::Numeric {
            return Err(QueryError::NonNumericMeasure(self.measure.clone()));
        }
        for f in &self.filters {
            let feature = schema.feature(&f.feature).ok_or_else(|| QueryError::UnknownFeature(f.feature.clone()))?;
            f.check(feature.kind)?;
        }
        Ok(())
    }
}

/// Facts passing every filter, in dataset order.
pub fn filtered_facts<'a>(dataset: &'a Dataset, filters: &[Filter]) -> Vec<&'a Fact> {
    dataset.facts.iter().filter(|f| filters.iter().all(|flt| flt.matches(f))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub feature: String,
    pub character_type: String,
    pub temporal: bool,
    pub characters: Vec<Character>,
}

impl Axis {
    pub fn len(&self) -> usize {
        self.characters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.characters.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.characters.iter().position(|c| c.id == id)
    }
}

/// Output of [`execute_groupby`]. Cells are stored densely in row-major
/// order over the axes; `None` marks a combination with no contributing
/// facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub spec: GroupBySpec,
    pub measure: MeasureType,
    pub axes: Vec<Axis>,
    cells: Vec<Option<f64>>,
    /// Per axis, per character; only for additive aggregates.
    marginals: Option<Vec<Vec<Option<f64>>>>,
    grand_total: Option<f64>,
}

impl ResultSet {
    pub fn arity(&self) -> usize {
        self.axes.len()
    }

    pub fn aggregate(&self) -> AggregateFunction {
        self.spec.agg
    }

    fn offset(&self, coords: &[usize]) -> usize {
        match coords {
            [i] => *i,
            [i, j] => i * self.axes[1].len() + j,
            _ => panic!("coordinate arity {} does not match result arity", coords.len()),
        }
    }

    pub fn cell(&self, coords: &[usize]) -> Option<f64> {
        assert_eq!(coords.len(), self.arity());
        self.cells[self.offset(coords)]
    }

    /// Present cells in row-major axis order.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let width = if self.arity() == 2 { self.axes[1].len() } else { 1 };
        let arity = self.arity();
        self.cells.iter().enumerate().filter_map(move |(k, v)| {
            let coords = if arity == 2 { vec![k / width, k % width] } else { vec![k] };
            v.map(|v| (coords, v))
        })
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Characters at the given coordinates, one per axis.
    pub fn characters_at(&self, coords: &[usize]) -> Vec<&Character> {
        coords.iter().zip(&self.axes).map(|(i, a)| &a.characters[*i]).collect()
    }

    pub fn marginals(&self, axis: usize) -> Option<&[Option<f64>]> {
        self.marginals.as_ref().and_then(|m| m.get(axis)).map(Vec::as_slice)
    }

    pub fn row_marginals(&self) -> Option<&[Option<f64>]> {
        self.marginals(0)
    }

    pub fn column_marginals(&self) -> Option<&[Option<f64>]> {
        self.marginals(1)
    }

    pub fn grand_total(&self) -> Option<f64> {
        self.grand_total
    }
}

fn fold(agg: AggregateFunction, values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    // sorted so the sum does not depend on fact order
    values.sort_by(f64::total_cmp);
    let sum = || values.iter().fold(0.0, |acc, v| acc + v);
    Some(match agg {
        AggregateFunction::Sum => sum(),
        AggregateFunction::Avg => sum() / values.len() as f64,
        AggregateFunction::Count => values.len() as f64,
        AggregateFunction::Min => values[0],
        AggregateFunction::Max => values[values.len() - 1],
    })
}

pub fn execute_groupby(dataset: &Dataset, catalog: &Catalog, spec: &GroupBySpec) -> Result<ResultSet, QueryError> {
    spec.validate(dataset, catalog)?;
    let facts = filtered_facts(dataset, &spec.filters);

    // (grouper ids, measure) for facts whose grouper values are all present
    let mut rows: Vec<(Vec<&str>, Option<f64>)> = Vec::with_capacity(facts.len());
    for fact in &facts {
        let keys: Option<Vec<&str>> = spec.group_by.iter().map(|g| fact.get(g).key()).collect();
        if let Some(keys) = keys {
            rows.push((keys, fact.get(&spec.measure).as_f64()));
        }
    }

    let mut axes = Vec::with_capacity(spec.group_by.len());
    for (k, g) in spec.group_by.iter().enumerate() {
        let ctype = catalog.dimension_type(g).expect("validated grouper").to_string();
        let mut ids: Vec<&str> = rows.iter().map(|(keys, _)| keys[k]).collect();
        ids.sort_unstable();
        ids.dedup();
        let mut characters = ids
            .into_iter()
            .map(|id| {
                resolve_character(&ctype, id, &catalog.registry).cloned().map_err(|_| {
                    QueryError::UnregisteredCharacter { character_type: ctype.clone(), id: id.to_string() }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        characters.sort_by(Character::axis_cmp);
        let temporal = catalog.registry.character_type(&ctype).is_some_and(|t| t.temporal);
        axes.push(Axis { feature: g.clone(), character_type: ctype, temporal, characters });
    }

    let index: Vec<BTreeMap<&str, usize>> = axes
        .iter()
        .map(|a| a.characters.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect())
        .collect();
    let size: usize = axes.iter().map(Axis::len).product();
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); if axes.iter().any(Axis::is_empty) { 0 } else { size }];
    let width = if axes.len() == 2 { axes[1].len() } else { 1 };
    for (keys, value) in &rows {
        let Some(v) = value else { continue };
        let offset = match keys.as_slice() {
            [a] => index[0][a],
            [a, b] => index[0][a] * width + index[1][b],
            _ => unreachable!(),
        };
        buckets[offset].push(*v);
    }
    let cells: Vec<Option<f64>> = buckets.iter_mut().map(|b| fold(spec.agg, b)).collect();

    let (marginals, grand_total) = if spec.agg.is_additive() {
        let sum_present = |it: &mut dyn Iterator<Item = Option<f64>>| {
            it.flatten().fold(None, |acc: Option<f64>, v| Some(acc.unwrap_or(0.0) + v))
        };
        let mut margins = Vec::new();
        if axes.len() == 1 {
            margins.push(cells.clone());
        } else {
            let (h, w) = (axes[0].len(), axes[1].len());
            margins.push((0..h).map(|i| sum_present(&mut (0..w).map(|j| cells[i * w + j]))).collect());
            margins.push((0..w).map(|j| sum_present(&mut (0..h).map(|i| cells[i * w + j]))).collect());
        }
        let total = cells.iter().flatten().fold(0.0, |acc, v| acc + v);
        (Some(margins), Some(total))
    } else {
        (None, None)
    };

    let measure = catalog
        .measure(&spec.measure)
        .cloned()
        .unwrap_or_else(|| MeasureType::base(&spec.measure, ""))
        .aggregated(spec.agg);

    Ok(ResultSet { spec: spec.clone(), measure, axes, cells, marginals, grand_total })
}

/// An ordered view of values along one axis. Characters whose value is
/// absent are listed in `missing` rather than given a zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesView {
    pub feature: String,
    pub temporal: bool,
    pub points: Vec<(Character, f64)>,
    pub missing: Vec<Character>,
}

impl SeriesView {
    pub fn is_dense(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|(_, v)| *v).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn from_values(axis: &Axis, values: impl Iterator<Item = Option<f64>>) -> Self {
        let mut points = Vec::new();
        let mut missing = Vec::new();
        for (c, v) in axis.characters.iter().zip(values) {
            match v {
                Some(v) => points.push((c.clone(), v)),
                None => missing.push(c.clone()),
            }
        }
        Self { feature: axis.feature.clone(), temporal: axis.temporal, points, missing }
    }
}

/// Marginal sums along `axis`; SUM results only.
pub fn marginal_series(rs: &ResultSet, axis: usize) -> Result<SeriesView, QueryError> {
    if rs.aggregate() != AggregateFunction::Sum {
        return Err(QueryError::MarginalsUndefinedForAggregate(rs.aggregate()));
    }
    let a = rs.axes.get(axis).ok_or(QueryError::AxisOutOfRange(axis))?;
    let m = rs.marginals(axis).expect("SUM results carry marginals");
    Ok(SeriesView::from_values(a, m.iter().copied()))
}

/// The cells of one row or column, ordered along the other axis.
pub fn slice_series(rs: &ResultSet, fixed_axis: usize, fixed: &Character) -> Result<SeriesView, QueryError> {
    if rs.arity() != 2 {
        return Err(QueryError::SliceNeedsTwoAxes);
    }
    let axis = rs.axes.get(fixed_axis).ok_or(QueryError::AxisOutOfRange(fixed_axis))?;
    if fixed.character_type != axis.character_type {
        return Err(QueryError::CharacterNotOnAxis(fixed.id.clone()));
    }
    let i = axis.position(&fixed.id).ok_or_else(|| QueryError::CharacterNotOnAxis(fixed.id.clone()))?;
    let other = 1 - fixed_axis;
    let values = (0..rs.axes[other].len()).map(|j| {
        let coords = if fixed_axis == 0 { [i, j] } else { [j, i] };
        rs.cell(&coords)
    });
    let mut view = SeriesView::from_values(&rs.axes[other], values);
    // a slice reports only what is present
    view.missing.clear();
    Ok(view)
}
