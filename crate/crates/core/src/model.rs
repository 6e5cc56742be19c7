//! Back-end data metamodel: schemata, features, facts, datasets, measure
//! types, character types, characters and roles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("schema `{0}` must declare at least one feature")]
    EmptySchema(String),
    #[error("feature `{feature}` declared twice in schema `{schema}`")]
    DuplicateFeature { schema: String, feature: String },
    #[error("unknown character type `{0}`")]
    UnknownCharacterType(String),
    #[error("unknown character `{id}` of type `{character_type}`")]
    UnknownCharacter { character_type: String, id: String },
    #[error("character `{id}` registered twice for type `{character_type}`")]
    DuplicateCharacter { character_type: String, id: String },
    #[error("role name must not be empty")]
    EmptyRoleName,
    #[error("derived measure `{measure}` references unknown measure `{reference}`")]
    UnknownMeasureReference { measure: String, reference: String },
}

/// The four coarse feature classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureKind {
    Identifier,
    Descriptor,
    Numeric,
    DateTime,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureKind::Identifier => "Identifier",
            FeatureKind::Descriptor => "Descriptor",
            FeatureKind::Numeric => "Numeric",
            FeatureKind::DateTime => "DateTime",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValueDomain {
    Numeric { min: Option<f64>, max: Option<f64> },
    Text,
    Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
    pub domain: ValueDomain,
}

impl Feature {
    /// A feature with the unrestricted domain of its kind.
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        let domain = match kind {
            FeatureKind::Numeric => ValueDomain::Numeric { min: None, max: None },
            FeatureKind::DateTime => ValueDomain::Timestamp,
            FeatureKind::Identifier | FeatureKind::Descriptor => ValueDomain::Text,
        };
        Self { name: name.into(), kind, domain }
    }

    pub fn with_domain(mut self, domain: ValueDomain) -> Self {
        self.domain = domain;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    name: String,
    features: Vec<Feature>,
}

impl Schema {
    pub fn new(name: impl Into<String>, features: Vec<Feature>) -> Result<Self, ModelError> {
        let name = name.into();
        if features.is_empty() {
            return Err(ModelError::EmptySchema(name));
        }
        let mut seen = BTreeSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(ModelError::DuplicateFeature { schema: name, feature: f.name.clone() });
            }
        }
        Ok(Self { name, features })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, name: &str) -> Option<&Feature> {
        self.features.iter().find(|f| f.name == name)
    }
}

/// A typed feature value. DateTime values keep their ISO-8601 text next to
/// the parsed epoch seconds used for ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Null,
    Number(f64),
    Text(String),
    DateTime { iso: String, epoch: i64 },
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            _ => None,
        }
    }

    /// Text form used as a character id.
    pub fn key(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            Value::DateTime { iso, .. } => Some(iso),
            _ => None,
        }
    }

    fn conforms_to(&self, feature: &Feature) -> Result<(), String> {
        match (self, feature.kind) {
            (Value::Null, _) => Ok(()),
            (Value::Number(x), FeatureKind::Numeric) => {
                if !x.is_finite() {
                    return Err(format!("non-finite number {x}"));
                }
                if let ValueDomain::Numeric { min, max } = &feature.domain {
                    if min.is_some_and(|m| *x < m) || max.is_some_and(|m| *x > m) {
                        return Err(format!("value {x} outside the numeric domain"));
                    }
                }
                Ok(())
            }
            (Value::Text(_), FeatureKind::Identifier | FeatureKind::Descriptor) => Ok(()),
            (Value::DateTime { .. }, FeatureKind::DateTime) => Ok(()),
            (v, kind) => Err(format!("expected {kind} value, found {}", v.type_name())),
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Number(_) => "number",
            Value::Text(_) => "text",
            Value::DateTime { .. } => "datetime",
        }
    }
}

/// One observation: feature name to value. Missing features read as null.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub values: BTreeMap<String, Value>,
}

impl Fact {
    pub fn get(&self, feature: &str) -> &Value {
        self.values.get(feature).unwrap_or(&Value::Null)
    }

    pub fn set(&mut self, feature: impl Into<String>, value: Value) {
        self.values.insert(feature.into(), value);
    }
}

impl<K: Into<String>> FromIterator<(K, Value)> for Fact {
    fn from_iter<I: IntoIterator<Item = (K, Value)>>(iter: I) -> Self {
        Self { values: iter.into_iter().map(|(k, v)| (k.into(), v)).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Schema,
    pub facts: Vec<Fact>,
}

impl Dataset {
    pub fn new(schema: Schema, facts: Vec<Fact>) -> Self {
        Self { schema, facts }
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub fact_index: usize,
    pub feature: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every fact value against its declared feature.
pub fn validate_dataset(dataset: &Dataset) -> ValidationReport {
    let mut violations = Vec::new();
    for (fact_index, fact) in dataset.facts.iter().enumerate() {
        for (name, value) in &fact.values {
            let reason = match dataset.schema.feature(name) {
                None => Some("feature not declared in schema".to_string()),
                Some(feature) => value.conforms_to(feature).err(),
            };
            if let Some(reason) = reason {
                violations.push(Violation { fact_index, feature: name.clone(), reason });
            }
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AggregateFunction {
    Sum,
    Avg,
    Count,
    Min,
    Max,
}

impl AggregateFunction {
    /// SUM and COUNT decompose over partitions, so marginals are defined.
    pub fn is_additive(self) -> bool {
        matches!(self, AggregateFunction::Sum | AggregateFunction::Count)
    }
}

impl fmt::Display for AggregateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AggregateFunction::Sum => "SUM",
            AggregateFunction::Avg => "AVG",
            AggregateFunction::Count => "COUNT",
            AggregateFunction::Min => "MIN",
            AggregateFunction::Max => "MAX",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeasureKind {
    Base,
    Aggregate { function: AggregateFunction },
    Derived { expression: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureType {
    pub name: String,
    pub unit: String,
    pub kind: MeasureKind,
}

impl MeasureType {
    pub fn base(name: impl Into<String>, unit: impl Into<String>) -> Self {
        Self { name: name.into(), unit: unit.into(), kind: MeasureKind::Base }
    }

    /// The measure produced by applying `function` to `self` in a query.
    pub fn aggregated(&self, function: AggregateFunction) -> Self {
        let unit = match function {
            AggregateFunction::Count => "items".to_string(),
            _ => self.unit.clone(),
        };
        Self { name: self.name.clone(), unit, kind: MeasureKind::Aggregate { function } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub measure: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Role {
    pub name: String,
    pub description: String,
}

impl Role {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(ModelError::EmptyRoleName);
        }
        Ok(Self { name, description: description.into() })
    }
}

/// A named domain of characters. `Id` and `Description` are implicit and are
/// not listed among the characteristic properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterType {
    pub name: String,
    pub properties: Vec<Feature>,
    /// Characters of this type carry an epoch and sort chronologically.
    pub temporal: bool,
}

impl CharacterType {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), properties: Vec::new(), temporal: false }
    }

    /// Implicit `Id` and `Description` followed by the declared properties.
    pub fn features(&self) -> Vec<Feature> {
        let mut out = vec![
            Feature::new("Id", FeatureKind::Identifier),
            Feature::new("Description", FeatureKind::Descriptor),
        ];
        out.extend(self.properties.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Character {
    pub character_type: String,
    pub id: String,
    pub description: String,
    pub properties: BTreeMap<String, Value>,
    /// Epoch seconds, for characters of temporal types.
    pub epoch: Option<i64>,
    /// Row position in the dimension table that declared the character.
    pub ordinal: Option<usize>,
}

impl Character {
    /// A character with no lookup table behind it: description = id.
    pub fn flat(character_type: impl Into<String>, id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            character_type: character_type.into(),
            description: id.clone(),
            id,
            properties: BTreeMap::new(),
            epoch: None,
            ordinal: None,
        }
    }

    pub fn reference(&self) -> CharacterRef {
        CharacterRef {
            character_type: self.character_type.clone(),
            id: self.id.clone(),
            description: self.description.clone(),
        }
    }

    /// Axis ordering: chronological when temporal, then declared table order,
    /// then description.
    pub fn axis_cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self.epoch, other.epoch) {
            (Some(a), Some(b)) if a != b => return a.cmp(&b),
            _ => {}
        }
        match (self.ordinal, other.ordinal) {
            (Some(a), Some(b)) if a != b => return a.cmp(&b),
            (Some(_), None) => return std::cmp::Ordering::Less,
            (None, Some(_)) => return std::cmp::Ordering::Greater,
            _ => {}
        }
        self.description.cmp(&other.description).then_with(|| self.id.cmp(&other.id))
    }
}

/// Identity of a character as carried inside highlight records.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CharacterRef {
    pub character_type: String,
    pub id: String,
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CharacterRegistry {
    types: BTreeMap<String, CharacterType>,
    characters: BTreeMap<String, BTreeMap<String, Character>>,
}

impl CharacterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a type; re-registering keeps the existing characters.
    pub fn add_type(&mut self, character_type: CharacterType) {
        self.characters.entry(character_type.name.clone()).or_default();
        self.types.insert(character_type.name.clone(), character_type);
    }

    pub fn insert(&mut self, character: Character) -> Result<(), ModelError> {
        let members = self
            .characters
            .get_mut(&character.character_type)
            .ok_or_else(|| ModelError::UnknownCharacterType(character.character_type.clone()))?;
        if members.contains_key(&character.id) {
            return Err(ModelError::DuplicateCharacter {
                character_type: character.character_type.clone(),
                id: character.id.clone(),
            });
        }
        members.insert(character.id.clone(), character);
        Ok(())
    }

    pub fn contains(&self, character_type: &str, id: &str) -> bool {
        self.characters.get(character_type).is_some_and(|m| m.contains_key(id))
    }

    pub fn character_type(&self, name: &str) -> Option<&CharacterType> {
        self.types.get(name)
    }

    pub fn types(&self) -> impl Iterator<Item = &CharacterType> {
        self.types.values()
    }

    pub fn characters(&self, character_type: &str) -> impl Iterator<Item = &Character> {
        self.characters.get(character_type).into_iter().flat_map(|m| m.values())
    }

    pub fn len(&self) -> usize {
        self.characters.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn resolve_character<'a>(
    character_type: &str,
    id: &str,
    registry: &'a CharacterRegistry,
) -> Result<&'a Character, ModelError> {
    let members = registry
        .characters
        .get(character_type)
        .ok_or_else(|| ModelError::UnknownCharacterType(character_type.to_string()))?;
    members.get(id).ok_or_else(|| ModelError::UnknownCharacter {
        character_type: character_type.to_string(),
        id: id.to_string(),
    })
}

/// Measure types and dimension bindings that accompany a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub measures: BTreeMap<String, MeasureType>,
    /// Dimension feature name to character type name.
    pub dimensions: BTreeMap<String, String>,
    pub registry: CharacterRegistry,
}

impl Catalog {
    pub fn measure(&self, name: &str) -> Option<&MeasureType> {
        self.measures.get(name)
    }

    pub fn dimension_type(&self, feature: &str) -> Option<&str> {
        self.dimensions.get(feature).map(String::as_str)
    }
}

/// Checks that every derived measure references only known measures.
pub fn check_derivations(
    measures: &[MeasureType],
    references: impl Fn(&str) -> Vec<String>,
) -> Result<(), ModelError> {
    let known: BTreeSet<&str> = measures.iter().map(|m| m.name.as_str()).collect();
    for m in measures {
        if let MeasureKind::Derived { expression } = &m.kind {
            for r in references(expression) {
                if !known.contains(r.as_str()) {
                    return Err(ModelError::UnknownMeasureReference {
                        measure: m.name.clone(),
                        reference: r,
                    });
                }
            }
        }
    }
    Ok(())
}
