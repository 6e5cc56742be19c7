//! Front-end metamodel: holistic and elementary highlight records, the
//! registries that constrain them, and their JSON form.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{CharacterRef, CharacterRegistry, Role};
use crate::stats::KernelResult;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Error)]
pub enum HighlightError {
    #[error("invalid highlight `{id}`: {reasons}")]
    InvalidHighlight { id: String, reasons: String },
    #[error("malformed highlight document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported schema version `{0}`")]
    UnsupportedVersion(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightCharacter {
    pub role: String,
    pub text: String,
    #[serde(flatten)]
    pub character: CharacterRef,
}

impl HighlightCharacter {
    pub fn new(role: &Role, character: CharacterRef) -> Self {
        Self { role: role.name.clone(), text: role.description.clone(), character }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRef {
    pub role: String,
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanator {
    pub role: String,
    pub text: String,
    pub feature: String,
}

impl Explanator {
    pub fn new(role: &str, text: &str, feature: impl Into<String>) -> Self {
        Self { role: role.into(), text: text.into(), feature: feature.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Provenance {
    /// Stable within one run: detector name and target, e.g. `dominance/City`.
    pub id: String,
    pub query_spec_digest: String,
    pub dataset_digest: String,
    pub timestamp: Option<String>,
    /// Raw kernel output behind the score, when a kernel was involved.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kernel: Option<KernelResult>,
}

/// A fact-level detail. Its model is the parent's model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "elementary", rename_all = "camelCase")]
pub struct ElementaryHighlight {
    #[serde(rename = "type")]
    pub highlight_type: String,
    pub characters: Vec<HighlightCharacter>,
    pub measure_value: f64,
    pub score_type: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "holistic", rename_all = "camelCase")]
pub struct HolisticHighlight {
    #[serde(rename = "type")]
    pub highlight_type: String,
    pub algorithm: String,
    pub model_type: String,
    pub model: String,
    pub score_type: String,
    pub score: f64,
    pub measure: MeasureRef,
    pub supportive_explanators: Vec<Explanator>,
    pub details: Vec<ElementaryHighlight>,
    pub provenance: Provenance,
}

impl HolisticHighlight {
    pub fn id(&self) -> &str {
        &self.provenance.id
    }

    /// Characters named by any detail, deduplicated, in first-mention order.
    pub fn mentioned_characters(&self) -> Vec<&CharacterRef> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for d in &self.details {
            for c in &d.characters {
                if seen.insert(&c.character) {
                    out.push(&c.character);
                }
            }
        }
        out
    }
}

/// A per-detector note about a target that produced no highlight.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub detector: String,
    pub target: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HighlightDocument {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub schema_version: Option<String>,
    pub highlights: Vec<HolisticHighlight>,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Orientation {
    HigherIsStronger,
    LowerIsStronger,
    /// Magnitude matters, sign gives direction.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScoreFormat {
    /// Scientific notation below 1e-3.
    PValue,
    Percentage,
    Integer,
    Decimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTypeSpec {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub integer: bool,
    pub orientation: Orientation,
    pub format: ScoreFormat,
}

impl ScoreTypeSpec {
    pub fn contains(&self, score: f64) -> bool {
        score.is_finite()
            && self.min.is_none_or(|m| score >= m)
            && self.max.is_none_or(|m| score <= m)
            && (!self.integer || score.fract() == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreTypeRegistry {
    entries: BTreeMap<String, ScoreTypeSpec>,
}

impl ScoreTypeRegistry {
    pub fn register(&mut self, name: impl Into<String>, spec: ScoreTypeSpec) {
        self.entries.insert(name.into(), spec);
    }

    pub fn get(&self, name: &str) -> Option<&ScoreTypeSpec> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Human form of a score: p-values in scientific notation below 1e-3,
    /// shares as percentages, ranks as integers.
    pub fn format(&self, name: &str, score: f64) -> String {
        let format = self.get(name).map_or(ScoreFormat::Decimal, |s| s.format);
        format_score(format, score)
    }
}

pub fn format_score(format: ScoreFormat, x: f64) -> String {
    match format {
        ScoreFormat::PValue if x != 0.0 && x.abs() < 1e-3 => {
            let s = format!("{x:.2e}");
            let (mantissa, exp) = s.split_once('e').expect("exponent form");
            format!("{}e{exp}", trim_decimal(mantissa))
        }
        ScoreFormat::PValue => trim_decimal(&format!("{x:.4}")),
        ScoreFormat::Percentage => format!("{}%", trim_decimal(&format!("{:.1}", x * 100.0))),
        ScoreFormat::Integer => format!("{}", x.round() as i64),
        ScoreFormat::Decimal => trim_decimal(&format!("{x:.3}")),
    }
}

/// Plain rendering of a measure value: at most two decimals, no trailing zeros.
pub fn format_value(x: f64) -> String {
    trim_decimal(&format!("{x:.2}"))
}

fn trim_decimal(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" { "0".into() } else { t.into() }
}

/// A model type's domain. An entry containing `{}` stands for a family of
/// models parameterised by a positive integer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTypeSpec {
    pub domain: Vec<String>,
    /// Models that report the absence of the property.
    pub negative: Vec<String>,
}

impl ModelTypeSpec {
    pub fn admits(&self, model: &str) -> bool {
        self.domain.iter().any(|pattern| match pattern.split_once("{}") {
            None => pattern == model,
            Some((pre, post)) => model
                .strip_prefix(pre)
                .and_then(|rest| rest.strip_suffix(post))
                .and_then(|n| n.parse::<usize>().ok())
                .is_some_and(|n| n >= 1),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightTypeSpec {
    pub algorithms: Vec<String>,
    /// Type name carried by the elementary details, if the type has any.
    pub elementary: Option<String>,
}

/// Everything a highlight is checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightCatalog {
    pub score_types: ScoreTypeRegistry,
    pub highlight_types: BTreeMap<String, HighlightTypeSpec>,
    /// Algorithm to model type; a map, so each algorithm has exactly one.
    pub algorithms: BTreeMap<String, String>,
    pub model_types: BTreeMap<String, ModelTypeSpec>,
}

pub mod names {
    pub const DISTRIBUTION: &str = "Distribution";
    pub const CORRELATION: &str = "Correlation";
    pub const TREND: &str = "Trend";
    pub const SEASONALITY: &str = "Seasonality";
    pub const MODALITY: &str = "Modality";
    pub const TOP_K: &str = "Top-k";
    pub const MEGA_CONTRIBUTOR: &str = "Mega-contributor";
    pub const DOMINANCE: &str = "Dominance";

    pub const PEAK: &str = "Peak";
    pub const PEER_DOMINATOR: &str = "Peer-dominator";

    pub const SHAPIRO_WILK: &str = "Shapiro-Wilk";
    pub const KOLMOGOROV_SMIRNOV: &str = "Kolmogorov-Smirnov";
    pub const KENDALL: &str = "Kendall";
    pub const PEARSON: &str = "Pearson";
    pub const SPEARMAN: &str = "Spearman";
    pub const MANN_KENDALL: &str = "Mann-Kendall";
    pub const AUTOCORRELATION: &str = "Autocorrelation";
    pub const LOCAL_MAXIMA: &str = "Strict local maxima";
    pub const SORT: &str = "Descending sort";
    pub const MARGINAL_SHARE: &str = "Marginal share";
    pub const PEER_DOMINANCE: &str = "Strict peer dominance";

    pub const P_VALUE: &str = "p-value";
    pub const SHARE: &str = "share of total";
    pub const DOMINATED_PEERS: &str = "percentage of dominated peers";
    pub const RANK: &str = "rank";
    pub const PEAK_RATIO: &str = "peak-to-mean ratio";
    pub const AUTOCORRELATION_SCORE: &str = "autocorrelation";
    pub const KENDALL_TAU: &str = "Kendall tau";
    pub const PEARSON_R: &str = "Pearson r";
    pub const SPEARMAN_RHO: &str = "Spearman rho";
}

impl Default for HighlightCatalog {
    fn default() -> Self {
        use names::*;
        let unit = |format, orientation| ScoreTypeSpec {
            min: Some(0.0),
            max: Some(1.0),
            integer: false,
            orientation,
            format,
        };
        let signed = ScoreTypeSpec {
            min: Some(-1.0),
            max: Some(1.0),
            integer: false,
            orientation: Orientation::Signed,
            format: ScoreFormat::Decimal,
        };
        let mut score_types = ScoreTypeRegistry::default();
        score_types.register(P_VALUE, unit(ScoreFormat::PValue, Orientation::LowerIsStronger));
        score_types.register(SHARE, unit(ScoreFormat::Percentage, Orientation::HigherIsStronger));
        score_types.register(DOMINATED_PEERS, unit(ScoreFormat::Percentage, Orientation::HigherIsStronger));
        score_types.register(
            RANK,
            ScoreTypeSpec {
                min: Some(1.0),
                max: None,
                integer: true,
                orientation: Orientation::LowerIsStronger,
                format: ScoreFormat::Integer,
            },
        );
        score_types.register(
            PEAK_RATIO,
            ScoreTypeSpec {
                min: None,
                max: None,
                integer: false,
                orientation: Orientation::HigherIsStronger,
                format: ScoreFormat::Decimal,
            },
        );
        for name in [AUTOCORRELATION_SCORE, KENDALL_TAU, PEARSON_R, SPEARMAN_RHO] {
            score_types.register(name, signed.clone());
        }

        let ht = |algorithms: &[&str], elementary: Option<&str>| HighlightTypeSpec {
            algorithms: algorithms.iter().map(|s| s.to_string()).collect(),
            elementary: elementary.map(str::to_string),
        };
        let highlight_types = BTreeMap::from([
            (DISTRIBUTION.to_string(), ht(&[SHAPIRO_WILK, KOLMOGOROV_SMIRNOV], None)),
            (CORRELATION.to_string(), ht(&[KENDALL, PEARSON, SPEARMAN], None)),
            (TREND.to_string(), ht(&[MANN_KENDALL], None)),
            (SEASONALITY.to_string(), ht(&[AUTOCORRELATION], None)),
            (MODALITY.to_string(), ht(&[LOCAL_MAXIMA], Some(PEAK))),
            (TOP_K.to_string(), ht(&[SORT], Some(TOP_K))),
            (MEGA_CONTRIBUTOR.to_string(), ht(&[MARGINAL_SHARE], Some(MEGA_CONTRIBUTOR))),
            (DOMINANCE.to_string(), ht(&[PEER_DOMINANCE], Some(PEER_DOMINATOR))),
        ]);

        let algorithms = [
            (SHAPIRO_WILK, "Distribution family"),
            (KOLMOGOROV_SMIRNOV, "Distribution family"),
            (KENDALL, "Correlation strength"),
            (PEARSON, "Correlation strength"),
            (SPEARMAN, "Correlation strength"),
            (MANN_KENDALL, "Trend direction"),
            (AUTOCORRELATION, "Periodicity"),
            (LOCAL_MAXIMA, "Modality"),
            (SORT, "Ranking"),
            (MARGINAL_SHARE, "Contribution"),
            (PEER_DOMINANCE, "Domination"),
        ]
        .into_iter()
        .map(|(a, m)| (a.to_string(), m.to_string()))
        .collect();

        let mt = |domain: &[&str], negative: &[&str]| ModelTypeSpec {
            domain: domain.iter().map(|s| s.to_string()).collect(),
            negative: negative.iter().map(|s| s.to_string()).collect(),
        };
        let model_types = BTreeMap::from([
            ("Distribution family".to_string(), mt(&["Normal", "Uniform", "Unclassified"], &["Unclassified"])),
            (
                "Correlation strength".to_string(),
                mt(
                    &[
                        "Positively Significant",
                        "Moderately Positively Significant",
                        "Insignificant",
                        "Moderately Negatively Significant",
                        "Negatively Significant",
                    ],
                    &["Insignificant"],
                ),
            ),
            ("Trend direction".to_string(), mt(&["Increasing", "Decreasing", "No trend"], &["No trend"])),
            ("Periodicity".to_string(), mt(&["Seasonal(lag={})", "Not seasonal"], &["Not seasonal"])),
            ("Modality".to_string(), mt(&["Unimodal", "Bimodal", "Multimodal"], &[])),
            ("Ranking".to_string(), mt(&["Top-k(k={})"], &[])),
            (
                "Contribution".to_string(),
                mt(&["Mega-contributor present", "Balanced contribution"], &["Balanced contribution"]),
            ),
            ("Domination".to_string(), mt(&["Full domination", "Partial domination"], &[])),
        ]);

        Self { score_types, highlight_types, algorithms, model_types }
    }
}

impl HighlightCatalog {
    /// Whether the highlight reports the absence of its property.
    pub fn is_negative(&self, h: &HolisticHighlight) -> bool {
        self.model_types.get(&h.model_type).is_some_and(|m| m.negative.contains(&h.model))
    }

    /// The model type the given algorithm determines.
    pub fn model_type_of(&self, algorithm: &str) -> Option<&str> {
        self.algorithms.get(algorithm).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HighlightViolation {
    /// Where in the record, e.g. `details[1].characters`.
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HighlightReport {
    pub violations: Vec<HighlightViolation>,
}

impl HighlightReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, reason: impl Into<String>) {
        self.violations.push(HighlightViolation { path: path.into(), reason: reason.into() });
    }

    pub fn reasons(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.reason.as_str()).collect()
    }
}

fn check_score(
    report: &mut HighlightReport,
    catalog: &HighlightCatalog,
    path: &str,
    score_type: &str,
    score: f64,
) {
    match catalog.score_types.get(score_type) {
        None => report.push(path, format!("unregistered score type `{score_type}`")),
        Some(spec) if !spec.contains(score) => report.push(path, "score out of range"),
        Some(_) => {}
    }
}

/// Checks `h` and its details against the catalog. An empty report means
/// the highlight is well formed.
pub fn validate_highlight(h: &HolisticHighlight, catalog: &HighlightCatalog) -> HighlightReport {
    let mut report = HighlightReport::default();
    let ty = catalog.highlight_types.get(&h.highlight_type);
    match ty {
        None => report.push("type", format!("unknown highlight type `{}`", h.highlight_type)),
        Some(t) if !t.algorithms.contains(&h.algorithm) => report.push(
            "algorithm",
            format!("algorithm `{}` is not a candidate for `{}`", h.algorithm, h.highlight_type),
        ),
        Some(_) => {}
    }
    match catalog.model_type_of(&h.algorithm) {
        None => report.push("algorithm", format!("unregistered algorithm `{}`", h.algorithm)),
        Some(mt) if mt != h.model_type => report.push(
            "modelType",
            format!("algorithm `{}` determines model type `{mt}`, not `{}`", h.algorithm, h.model_type),
        ),
        Some(_) => {}
    }
    match catalog.model_types.get(&h.model_type) {
        None => report.push("modelType", format!("unknown model type `{}`", h.model_type)),
        Some(spec) if !spec.admits(&h.model) => {
            report.push("model", format!("model `{}` outside the `{}` domain", h.model, h.model_type))
        }
        Some(_) => {}
    }
    check_score(&mut report, catalog, "score", &h.score_type, h.score);
    if h.measure.role.trim().is_empty() {
        report.push("measure.role", "empty role name");
    }
    if h.measure.name.trim().is_empty() {
        report.push("measure.name", "empty measure name");
    }
    for (i, e) in h.supportive_explanators.iter().enumerate() {
        if e.role.trim().is_empty() {
            report.push(format!("supportiveExplanators[{i}].role"), "empty role name");
        }
        if e.feature.trim().is_empty() {
            report.push(format!("supportiveExplanators[{i}].feature"), "empty feature name");
        }
    }

    let expected_detail = ty.and_then(|t| t.elementary.as_deref());
    if !h.details.is_empty() && expected_detail.is_none() && ty.is_some() {
        report.push("details", format!("`{}` highlights carry no details", h.highlight_type));
    }
    let mut sets = BTreeSet::new();
    for (i, d) in h.details.iter().enumerate() {
        let path = format!("details[{i}]");
        if let Some(expected) = expected_detail {
            if d.highlight_type != expected {
                report.push(format!("{path}.type"), format!("expected detail type `{expected}`"));
            }
        }
        if d.characters.is_empty() {
            report.push(format!("{path}.characters"), "empty character set");
        }
        let mut types = BTreeSet::new();
        for (j, c) in d.characters.iter().enumerate() {
            if c.role.trim().is_empty() {
                report.push(format!("{path}.characters[{j}].role"), "empty role name");
            }
            if !types.insert(&c.character.character_type) {
                report.push(format!("{path}.characters"), "duplicate character type");
            }
        }
        let mut key: Vec<_> = d.characters.iter().map(|c| &c.character).collect();
        key.sort();
        if !d.characters.is_empty() && !sets.insert(key) {
            report.push(format!("{path}.characters"), "character set does not identify the detail uniquely");
        }
        if !d.measure_value.is_finite() {
            report.push(format!("{path}.measureValue"), "non-finite measure value");
        }
        check_score(&mut report, catalog, &format!("{path}.score"), &d.score_type, d.score);
    }
    report
}

/// Every detail character must exist in the registry.
pub fn validate_characters(h: &HolisticHighlight, registry: &CharacterRegistry) -> HighlightReport {
    let mut report = HighlightReport::default();
    for (i, d) in h.details.iter().enumerate() {
        for (j, c) in d.characters.iter().enumerate() {
            if !registry.contains(&c.character.character_type, &c.character.id) {
                report.push(
                    format!("details[{i}].characters[{j}]"),
                    format!("unresolvable character `{}`", c.character.id),
                );
            }
        }
    }
    report
}

/// Rounds to 12 significant digits, the precision of the JSON form.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn canonical_kernel(k: &KernelResult) -> KernelResult {
    KernelResult { statistic: round_sig(k.statistic), z: k.z.map(round_sig), p_value: k.p_value.map(round_sig), n: k.n }
}

/// The highlight as it reads back from JSON: all numbers at 12 significant
/// digits.
pub fn canonicalize(h: &HolisticHighlight) -> HolisticHighlight {
    let mut h = h.clone();
    h.score = round_sig(h.score);
    for d in &mut h.details {
        d.measure_value = round_sig(d.measure_value);
        d.score = round_sig(d.score);
    }
    h.provenance.kernel = h.provenance.kernel.as_ref().map(canonical_kernel);
    h
}

fn build_document(
    highlights: &[HolisticHighlight],
    diagnostics: &[Diagnostic],
    catalog: &HighlightCatalog,
    schema_version: Option<String>,
) -> Result<HighlightDocument, HighlightError> {
    for h in highlights {
        let report = validate_highlight(h, catalog);
        if !report.is_empty() {
            let reasons = report.violations.iter().map(|v| format!("{}: {}", v.path, v.reason)).collect::<Vec<_>>();
            return Err(HighlightError::InvalidHighlight { id: h.id().to_string(), reasons: reasons.join("; ") });
        }
    }
    Ok(HighlightDocument {
        schema_version,
        highlights: highlights.iter().map(canonicalize).collect(),
        diagnostics: diagnostics.to_vec(),
    })
}

/// Compact, deterministic `{"highlights":[...],"diagnostics":[...]}`.
pub fn serialize_highlights(
    highlights: &[HolisticHighlight],
    diagnostics: &[Diagnostic],
    catalog: &HighlightCatalog,
) -> Result<String, HighlightError> {
    let doc = build_document(highlights, diagnostics, catalog, None)?;
    Ok(serde_json::to_string(&doc)?)
}

/// The versioned document written by the command-line tool.
pub fn serialize_document(
    highlights: &[HolisticHighlight],
    diagnostics: &[Diagnostic],
    catalog: &HighlightCatalog,
    pretty: bool,
) -> Result<String, HighlightError> {
    let doc = build_document(highlights, diagnostics, catalog, Some(SCHEMA_VERSION.to_string()))?;
    Ok(if pretty { serde_json::to_string_pretty(&doc)? } else { serde_json::to_string(&doc)? })
}

/// Reads either the bare or the versioned form.
pub fn deserialize_highlights(text: &str) -> Result<HighlightDocument, HighlightError> {
    let doc: HighlightDocument = serde_json::from_str(text)?;
    if let Some(v) = &doc.schema_version {
        if v.split('.').next() != SCHEMA_VERSION.split('.').next() {
            return Err(HighlightError::UnsupportedVersion(v.clone()));
        }
    }
    Ok(doc)
}

/// Lower-case hex SHA-256 of the compact JSON form of `value`.
pub fn digest_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    let hash = Sha256::digest(&bytes);
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::names::*;
    use super::*;

    fn character(t: &str, id: &str) -> HighlightCharacter {
        HighlightCharacter {
            role: "dominator".into(),
            text: "dominates its peers".into(),
            character: CharacterRef { character_type: t.into(), id: id.into(), description: id.into() },
        }
    }

    fn dominance() -> HolisticHighlight {
        HolisticHighlight {
            highlight_type: DOMINANCE.into(),
            algorithm: PEER_DOMINANCE.into(),
            model_type: "Domination".into(),
            model: "Full domination".into(),
            score_type: DOMINATED_PEERS.into(),
            score: 1.0,
            measure: MeasureRef { role: "main measure".into(), name: "Sales".into(), unit: "EUR".into() },
            supportive_explanators: vec![Explanator::new("peer axis", "among peers of", "City")],
            details: vec![ElementaryHighlight {
                highlight_type: PEER_DOMINATOR.into(),
                characters: vec![character("City", "Athens")],
                measure_value: 2100.0,
                score_type: DOMINATED_PEERS.into(),
                score: 1.0,
            }],
            provenance: Provenance {
                id: "dominance/City".into(),
                query_spec_digest: "q".into(),
                dataset_digest: "d".into(),
                timestamp: None,
                kernel: None,
            },
        }
    }

    #[test]
    fn well_formed_dominance_validates() {
        assert!(validate_highlight(&dominance(), &HighlightCatalog::default()).is_empty());
    }

    #[test]
    fn p_value_above_one_is_out_of_range() {
        let mut h = dominance();
        h.highlight_type = TREND.into();
        h.algorithm = MANN_KENDALL.into();
        h.model_type = "Trend direction".into();
        h.model = "No trend".into();
        h.score_type = P_VALUE.into();
        h.score = 1.5;
        h.details.clear();
        let r = validate_highlight(&h, &HighlightCatalog::default());
        assert_eq!(r.reasons(), ["score out of range"]);
    }

    #[test]
    fn duplicate_character_type_in_detail() {
        let mut h = dominance();
        h.details[0].characters.push(character("City", "Rhodes"));
        let r = validate_highlight(&h, &HighlightCatalog::default());
        assert_eq!(r.reasons(), ["duplicate character type"]);
    }

    #[test]
    fn model_outside_domain_and_wrong_model_type() {
        let mut h = dominance();
        h.model = "Total domination".into();
        let r = validate_highlight(&h, &HighlightCatalog::default());
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].path, "model");
        h.model_type = "Ranking".into();
        h.model = "Top-k(k=2)".into();
        let r = validate_highlight(&h, &HighlightCatalog::default());
        assert_eq!(r.violations[0].path, "modelType");
    }

    #[test]
    fn parameterised_models() {
        let spec = &HighlightCatalog::default().model_types["Periodicity"];
        assert!(spec.admits("Seasonal(lag=2)"));
        assert!(spec.admits("Not seasonal"));
        assert!(!spec.admits("Seasonal(lag=0)"));
        assert!(!spec.admits("Seasonal(lag=x)"));
    }

    #[test]
    fn algorithms_map_to_registered_model_types() {
        let c = HighlightCatalog::default();
        for (ty, spec) in &c.highlight_types {
            for a in &spec.algorithms {
                let mt = c.model_type_of(a).unwrap_or_else(|| panic!("{ty}/{a}"));
                assert!(c.model_types.contains_key(mt));
            }
        }
    }

    #[test]
    fn empty_document() {
        let s = serialize_highlights(&[], &[], &HighlightCatalog::default()).unwrap();
        assert_eq!(s, r#"{"highlights":[],"diagnostics":[]}"#);
    }

    #[test]
    fn json_shape_and_round_trip() {
        let h = dominance();
        let catalog = HighlightCatalog::default();
        let s = serialize_highlights(std::slice::from_ref(&h), &[], &catalog).unwrap();
        assert!(s.starts_with(r#"{"highlights":[{"kind":"holistic","type":"Dominance","algorithm":"#), "{s}");
        assert!(s.contains(
            r#""characters":[{"role":"dominator","text":"dominates its peers","characterType":"City","id":"Athens","description":"Athens"}]"#
        ));
        assert!(s.contains(r#""measure":{"role":"main measure","name":"Sales","unit":"EUR"}"#));
        let back = deserialize_highlights(&s).unwrap();
        assert_eq!(back.highlights, vec![h]);
        assert_eq!(serialize_highlights(&back.highlights, &[], &catalog).unwrap(), s);
    }

    #[test]
    fn invalid_highlight_is_not_serialized() {
        let mut h = dominance();
        h.score = 2.0;
        assert!(matches!(
            serialize_highlights(&[h], &[], &HighlightCatalog::default()),
            Err(HighlightError::InvalidHighlight { .. })
        ));
    }

    #[test]
    fn numbers_keep_twelve_significant_digits() {
        assert_eq!(round_sig(1280.0 / 2800.0), 0.457142857143);
        assert_eq!(round_sig(0.75), 0.75);
        assert_eq!(round_sig(-1.0e-20 / 3.0), -3.33333333333e-21);
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(ScoreFormat::PValue, 1e-4), "1e-4");
        assert_eq!(format_score(ScoreFormat::PValue, 0.000123456), "1.23e-4");
        assert_eq!(format_score(ScoreFormat::PValue, 0.5), "0.5");
        assert_eq!(format_score(ScoreFormat::Percentage, 0.75), "75%");
        assert_eq!(format_score(ScoreFormat::Percentage, 1280.0 / 2800.0), "45.7%");
        assert_eq!(format_score(ScoreFormat::Integer, 1.0), "1");
        assert_eq!(format_score(ScoreFormat::Decimal, 0.83), "0.83");
        assert_eq!(format_value(1000.0), "1000");
    }

    #[test]
    fn versioned_document_is_accepted() {
        let s = serialize_document(&[dominance()], &[], &HighlightCatalog::default(), true).unwrap();
        assert!(s.trim_start().starts_with("{\n  \"schemaVersion\": \"1.0\""));
        assert_eq!(deserialize_highlights(&s).unwrap().highlights.len(), 1);
        let bad = s.replace("\"1.0\"", "\"2.0\"");
        assert!(matches!(deserialize_highlights(&bad), Err(HighlightError::UnsupportedVersion(_))));
    }

    #[test]
    fn digest_is_stable_hex() {
        let d = digest_json(&"abc");
        assert_eq!(d.len(), 64);
        assert_eq!(d, digest_json(&"abc"));
        assert_ne!(d, digest_json(&"abd"));
    }
}
