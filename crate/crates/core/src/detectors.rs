//! Highlight extraction: each detector tests one archetype property over a
//! result set and reports one holistic highlight with its details, or a
//! diagnostic saying why it did not.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::highlight::names::*;
use crate::highlight::{
    digest_json, Diagnostic, ElementaryHighlight, Explanator, HighlightCatalog, HighlightCharacter,
    HolisticHighlight, MeasureRef, Provenance,
};
use crate::model::{AggregateFunction, Catalog, Character, Dataset, FeatureKind, MeasureType};
use crate::query::{filtered_facts, marginal_series, ResultSet, SeriesView};
use crate::stats::{
    autocorrelation, find_local_maxima, kendall_tau, ks_uniform, mann_kendall, pearson, shapiro_wilk,
    spearman, KernelResult, StatsError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("`{name}` must lie strictly between 0 and 1, got {value}")]
    FractionOutOfRange { name: &'static str, value: f64 },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("moderate correlation bin ({moderate}) must be below the significant bin ({significant})")]
    BinsOutOfOrder { moderate: f64, significant: f64 },
}

/// Detector names. Variant order is the alphabetical order of the names,
/// which is also the output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DetectorKind {
    Correlation,
    Distribution,
    Dominance,
    MegaContributor,
    Modality,
    Seasonality,
    Topk,
    Trend,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 8] = [
        DetectorKind::Correlation,
        DetectorKind::Distribution,
        DetectorKind::Dominance,
        DetectorKind::MegaContributor,
        DetectorKind::Modality,
        DetectorKind::Seasonality,
        DetectorKind::Topk,
        DetectorKind::Trend,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Correlation => "correlation",
            DetectorKind::Distribution => "distribution",
            DetectorKind::Dominance => "dominance",
            DetectorKind::MegaContributor => "megaContributor",
            DetectorKind::Modality => "modality",
            DetectorKind::Seasonality => "seasonality",
            DetectorKind::Topk => "topk",
            DetectorKind::Trend => "trend",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBins {
    pub significant: f64,
    pub moderate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CorrelationAlgorithm {
    #[default]
    Kendall,
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DominanceMode {
    #[default]
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub enabled: BTreeSet<DetectorKind>,
    pub k: usize,
    pub mega_contributor_threshold: f64,
    pub alpha: f64,
    pub correlation_bins: CorrelationBins,
    pub correlation_algorithm: CorrelationAlgorithm,
    pub dominance_mode: DominanceMode,
    pub partial_dominance_floor: f64,
    pub seasonality_threshold: f64,
    /// Report absent properties ("No trend", ...) as highlights.
    pub emit_negative: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        use DetectorKind::*;
        Self {
            // top-k and distribution are opt-in
            enabled: [Correlation, Dominance, MegaContributor, Modality, Seasonality, Trend].into(),
            k: 3,
            mega_contributor_threshold: 0.40,
            alpha: 0.05,
            correlation_bins: CorrelationBins { significant: 0.7, moderate: 0.4 },
            correlation_algorithm: CorrelationAlgorithm::Kendall,
            dominance_mode: DominanceMode::Strict,
            partial_dominance_floor: 0.75,
            seasonality_threshold: 0.5,
            emit_negative: true,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fractions = [
            ("megaContributorThreshold", self.mega_contributor_threshold),
            ("alpha", self.alpha),
            ("correlationBins.significant", self.correlation_bins.significant),
            ("correlationBins.moderate", self.correlation_bins.moderate),
            ("partialDominanceFloor", self.partial_dominance_floor),
            ("seasonalityThreshold", self.seasonality_threshold),
        ];
        for (name, value) in fractions {
            if !(value > 0.0 && value < 1.0) {
                return Err(ConfigError::FractionOutOfRange { name, value });
            }
        }
        if self.k == 0 {
            return Err(ConfigError::ZeroK);
        }
        let CorrelationBins { significant, moderate } = self.correlation_bins;
        if moderate >= significant {
            return Err(ConfigError::BinsOutOfOrder { moderate, significant });
        }
        Ok(())
    }

    pub fn only(kinds: &[DetectorKind]) -> Self {
        Self { enabled: kinds.iter().copied().collect(), ..Self::default() }
    }
}

/// Why a detector produced nothing for a target.
pub type Skip = String;

const MAIN_MEASURE: &str = "main measure";

fn insufficient(n: usize, required: usize) -> Skip {
    format!("insufficient data (n={n}, need at least {required})")
}

fn kernel_skip(e: StatsError) -> Skip {
    match e {
        StatsError::InsufficientN { required, actual } => insufficient(actual, required),
        StatsError::ConstantInput | StatsError::ConstantSeries | StatsError::AllTied | StatsError::ZeroRange => {
            format!("constant series: {e}")
        }
        other => other.to_string(),
    }
}

fn measure_ref(m: &MeasureType) -> MeasureRef {
    MeasureRef { role: MAIN_MEASURE.into(), name: m.name.clone(), unit: m.unit.clone() }
}

fn holistic(
    id: String,
    highlight_type: &str,
    algorithm: &str,
    model: String,
    score_type: &str,
    score: f64,
    measure: MeasureRef,
) -> HolisticHighlight {
    let model_type = HighlightCatalog::default()
        .model_type_of(algorithm)
        .expect("built-in algorithms are registered")
        .to_string();
    HolisticHighlight {
        highlight_type: highlight_type.into(),
        algorithm: algorithm.into(),
        model_type,
        model,
        score_type: score_type.into(),
        score,
        measure,
        supportive_explanators: Vec::new(),
        details: Vec::new(),
        provenance: Provenance {
            id,
            query_spec_digest: String::new(),
            dataset_digest: String::new(),
            timestamp: None,
            kernel: None,
        },
    }
}

fn character(role: &str, text: &str, c: &Character) -> HighlightCharacter {
    HighlightCharacter { role: role.into(), text: text.into(), character: c.reference() }
}

fn ordering_explanator(series: &SeriesView) -> Explanator {
    Explanator::new("ordering", "ordered along", series.feature.clone())
}

fn dense_values(series: &SeriesView, required: usize) -> Result<Vec<f64>, Skip> {
    if !series.is_dense() {
        let missing: Vec<_> = series.missing.iter().map(|c| c.description.as_str()).collect();
        return Err(format!("sparse series: no data for {}", missing.join(", ")));
    }
    if series.len() < required {
        return Err(insufficient(series.len(), required));
    }
    Ok(series.values())
}

/// Normality first, then uniformity; a sample that is neither is reported
/// as "Unclassified" with the Kolmogorov-Smirnov p-value.
pub fn detect_distribution(values: &[f64], measure: &MeasureType, cfg: &DetectorConfig) -> Result<HolisticHighlight, Skip> {
    if values.len() < 3 {
        return Err(insufficient(values.len(), 3));
    }
    let id = format!("distribution/{}", measure.name);
    let sw = shapiro_wilk(values);
    if let Ok(r) = &sw {
        let p = r.p_value.expect("Shapiro-Wilk reports a p-value");
        if p > cfg.alpha {
            return Ok(with_kernel(
                holistic(id, DISTRIBUTION, SHAPIRO_WILK, "Normal".into(), P_VALUE, p, measure_ref(measure)),
                r,
            ));
        }
    }
    let ks = match (ks_uniform(values), sw) {
        (Ok(r), _) => r,
        (Err(e), _) => return Err(kernel_skip(e)),
    };
    let p = ks.p_value.expect("KS reports a p-value");
    let model = if p > cfg.alpha { "Uniform" } else { "Unclassified" };
    if model == "Unclassified" && !cfg.emit_negative {
        return Err("no distribution model fits (negative results suppressed)".into());
    }
    Ok(with_kernel(
        holistic(id, DISTRIBUTION, KOLMOGOROV_SMIRNOV, model.into(), P_VALUE, p, measure_ref(measure)),
        &ks,
    ))
}

fn with_kernel(mut h: HolisticHighlight, r: &KernelResult) -> HolisticHighlight {
    h.provenance.kernel = Some(*r);
    h
}

/// Five-way label for a correlation coefficient.
pub fn correlation_model(statistic: f64, bins: &CorrelationBins) -> &'static str {
    let a = statistic.abs();
    match (statistic >= 0.0, a >= bins.significant, a >= bins.moderate) {
        (_, false, false) => "Insignificant",
        (true, true, _) => "Positively Significant",
        (false, true, _) => "Negatively Significant",
        (true, false, true) => "Moderately Positively Significant",
        (false, false, true) => "Moderately Negatively Significant",
    }
}

type PairKernel = fn(&[f64], &[f64]) -> Result<KernelResult, StatsError>;

/// Correlation between two measures over the same fact rows.
pub fn detect_correlation(
    x: &[f64],
    y: &[f64],
    measures: (&MeasureType, &MeasureType),
    cfg: &DetectorConfig,
) -> Result<HolisticHighlight, Skip> {
    let (kernel, algorithm, score_type): (PairKernel, _, _) = match cfg.correlation_algorithm {
        CorrelationAlgorithm::Kendall => (kendall_tau, KENDALL, KENDALL_TAU),
        CorrelationAlgorithm::Pearson => (pearson, PEARSON, PEARSON_R),
        CorrelationAlgorithm::Spearman => (spearman, SPEARMAN, SPEARMAN_RHO),
    };
    let r = kernel(x, y).map_err(kernel_skip)?;
    let model = correlation_model(r.statistic, &cfg.correlation_bins);
    if model == "Insignificant" && !cfg.emit_negative {
        return Err("insignificant correlation (negative results suppressed)".into());
    }
    let id = format!("correlation/{}~{}", measures.0.name, measures.1.name);
    let mut h = holistic(id, CORRELATION, algorithm, model.into(), score_type, r.statistic, measure_ref(measures.0));
    h.supportive_explanators.push(Explanator::new("second measure", "against", measures.1.name.clone()));
    Ok(with_kernel(h, &r))
}

pub fn detect_trend(series: &SeriesView, measure: &MeasureType, cfg: &DetectorConfig) -> Result<HolisticHighlight, Skip> {
    let values = dense_values(series, 3)?;
    let r = mann_kendall(&values).map_err(kernel_skip)?;
    let p = r.p_value.expect("Mann-Kendall reports a p-value");
    let model = match (p <= cfg.alpha, r.statistic > 0.0) {
        (true, true) => "Increasing",
        (true, false) => "Decreasing",
        (false, _) => "No trend",
    };
    if model == "No trend" && !cfg.emit_negative {
        return Err("no trend (negative results suppressed)".into());
    }
    let id = format!("trend/{}", series.feature);
    let mut h = holistic(id, TREND, MANN_KENDALL, model.into(), P_VALUE, p, measure_ref(measure));
    h.supportive_explanators.push(ordering_explanator(series));
    Ok(with_kernel(h, &r))
}

/// Best lag among 2..=(n-1)/2 by autocorrelation. Lag 1 is left out: it
/// measures smoothness, not periodicity.
pub fn detect_seasonality(series: &SeriesView, measure: &MeasureType, cfg: &DetectorConfig) -> Result<HolisticHighlight, Skip> {
    let values = dense_values(series, 5)?;
    if values.iter().all(|v| *v == values[0]) {
        return Err("constant series".into());
    }
    let mut best: Option<(usize, KernelResult)> = None;
    for lag in 2..=(values.len() - 1) / 2 {
        if let Ok(r) = autocorrelation(&values, lag) {
            if best.as_ref().is_none_or(|(_, b)| r.statistic > b.statistic) {
                best = Some((lag, r));
            }
        }
    }
    let (lag, r) = best.ok_or_else(|| "no lag with a defined autocorrelation".to_string())?;
    let model = if r.statistic >= cfg.seasonality_threshold {
        format!("Seasonal(lag={lag})")
    } else if cfg.emit_negative {
        "Not seasonal".to_string()
    } else {
        return Err("not seasonal (negative results suppressed)".into());
    };
    let id = format!("seasonality/{}", series.feature);
    let mut h = holistic(id, SEASONALITY, AUTOCORRELATION, model, AUTOCORRELATION_SCORE, r.statistic, measure_ref(measure));
    h.supportive_explanators.push(ordering_explanator(series));
    Ok(with_kernel(h, &r))
}

pub fn detect_modality(series: &SeriesView, measure: &MeasureType, _cfg: &DetectorConfig) -> Result<HolisticHighlight, Skip> {
    let values = dense_values(series, 3)?;
    let peaks = find_local_maxima(&values).map_err(kernel_skip)?;
    let model = match peaks.len() {
        0 => return Err("no strict local maximum".into()),
        1 => "Unimodal",
        2 => "Bimodal",
        _ => "Multimodal",
    };
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean <= 0.0 {
        return Err("peak-to-mean ratio undefined for a non-positive mean".into());
    }
    let top = peaks.iter().map(|&i| values[i]).fold(f64::NEG_INFINITY, f64::max);
    let id = format!("modality/{}", series.feature);
    let mut h = holistic(id, MODALITY, LOCAL_MAXIMA, model.into(), PEAK_RATIO, top / mean, measure_ref(measure));
    h.supportive_explanators.push(ordering_explanator(series));
    h.details = peaks
        .iter()
        .map(|&i| ElementaryHighlight {
            highlight_type: PEAK.into(),
            characters: vec![character("peak position", "peaks at", &series.points[i].0)],
            measure_value: values[i],
            score_type: PEAK_RATIO.into(),
            score: values[i] / mean,
        })
        .collect();
    Ok(h)
}

/// Present cells ranked by value, largest first; ties keep axis order.
pub fn ranked_cells(rs: &ResultSet) -> Vec<(Vec<usize>, f64)> {
    let mut cells: Vec<_> = rs.cells().collect();
    cells.sort_by(|(ca, a), (cb, b)| b.total_cmp(a).then_with(|| ca.cmp(cb)));
    cells
}

pub fn detect_topk(rs: &ResultSet, cfg: &DetectorConfig) -> Result<HolisticHighlight, Skip> {
    let ranked = ranked_cells(rs);
    if ranked.is_empty() {
        return Err("empty result".into());
    }
    let k = cfg.k.min(ranked.len());
    let features: Vec<_> = rs.axes.iter().map(|a| a.feature.as_str()).collect();
    let id = format!("topk/{}", features.join(","));
    let mut h = holistic(id, TOP_K, SORT, format!("Top-k(k={k})"), RANK, k as f64, measure_ref(&rs.measure));
    h.supportive_explanators = features.iter().map(|f| Explanator::new("grouping", "grouped by", *f)).collect();
    h.details = ranked[..k]
        .iter()
        .enumerate()
        .map(|(rank, (coords, value))| ElementaryHighlight {
            highlight_type: TOP_K.into(),
            characters: rs.characters_at(coords).into_iter().map(|c| character("coordinate", "located at", c)).collect(),
            measure_value: *value,
            score_type: RANK.into(),
            score: (rank + 1) as f64,
        })
        .collect();
    Ok(h)
}

fn axis_marginals(rs: &ResultSet, axis: usize) -> Result<&[Option<f64>], Skip> {
    if axis >= rs.arity() {
        return Err(format!("no axis {axis}"));
    }
    rs.marginals(axis).ok_or_else(|| format!("marginals undefined for {}", rs.aggregate()))
}

pub fn detect_mega_contributors(rs: &ResultSet, axis: usize, cfg: &DetectorConfig) -> Result<HolisticHighlight, Skip> {
    if rs.aggregate() != AggregateFunction::Sum {
        return Err(format!("shares need SUM, not {}", rs.aggregate()));
    }
    let marginals = axis_marginals(rs, axis)?;
    let total = rs.grand_total().unwrap_or(0.0);
    if total <= 0.0 {
        return Err(format!("grand total {total} is not positive"));
    }
    if marginals.iter().flatten().any(|m| *m < 0.0) {
        return Err("negative marginals make shares meaningless".into());
    }
    let a = &rs.axes[axis];
    let shares: Vec<(usize, f64, f64)> =
        marginals.iter().enumerate().filter_map(|(i, m)| m.map(|m| (i, m, m / total))).collect();
    let max_share = shares.iter().map(|s| s.2).fold(0.0, f64::max);
    let flagged: Vec<_> = shares.iter().filter(|s| s.2 >= cfg.mega_contributor_threshold).collect();
    let model = if flagged.is_empty() {
        if !cfg.emit_negative {
            return Err("no mega-contributor (negative results suppressed)".into());
        }
        "Balanced contribution"
    } else {
        "Mega-contributor present"
    };
    let id = format!("megaContributor/{}", a.feature);
    let mut h = holistic(id, MEGA_CONTRIBUTOR, MARGINAL_SHARE, model.into(), SHARE, max_share, measure_ref(&rs.measure));
    h.supportive_explanators.push(Explanator::new("partition", "partitioned by", a.feature.clone()));
    h.details = flagged
        .into_iter()
        .map(|&(i, m, share)| ElementaryHighlight {
            highlight_type: MEGA_CONTRIBUTOR.into(),
            characters: vec![character("mega-contributor", "contributes a large share of the total", &a.characters[i])],
            measure_value: m,
            score_type: SHARE.into(),
            score: share,
        })
        .collect();
    Ok(h)
}

/// For each character on `axis`, the fraction of its peers it strictly
/// dominates: higher in every slice of the other axis where both are
/// present, with at least one such slice.
pub fn dominance_scores(rs: &ResultSet, axis: usize) -> Vec<f64> {
    let n = rs.axes[axis].len();
    let other = rs.axes[1 - axis].len();
    let at = |i: usize, b: usize| if axis == 0 { rs.cell(&[i, b]) } else { rs.cell(&[b, i]) };
    (0..n)
        .map(|c| {
            let dominated = (0..n)
                .filter(|&p| p != c)
                .filter(|&p| {
                    let mut shared = 0;
                    for b in 0..other {
                        if let (Some(x), Some(y)) = (at(c, b), at(p, b)) {
                            if x <= y {
                                return false;
                            }
                            shared += 1;
                        }
                    }
                    shared > 0
                })
                .count();
            dominated as f64 / (n - 1) as f64
        })
        .collect()
}

pub fn detect_dominance(rs: &ResultSet, axis: usize, cfg: &DetectorConfig) -> Result<HolisticHighlight, Skip> {
    if rs.arity() != 2 {
        return Err("dominance needs two groupers".into());
    }
    if axis >= 2 {
        return Err(format!("no axis {axis}"));
    }
    let a = &rs.axes[axis];
    if a.len() < 2 {
        return Err(insufficient(a.len(), 2));
    }
    let scores = dominance_scores(rs, axis);
    let details: Vec<_> = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == 1.0 || **s >= cfg.partial_dominance_floor)
        .map(|(i, &score)| ElementaryHighlight {
            highlight_type: PEER_DOMINATOR.into(),
            characters: vec![character("dominator", "dominates its peers", &a.characters[i])],
            measure_value: character_value(rs, axis, i),
            score_type: DOMINATED_PEERS.into(),
            score,
        })
        .collect();
    if details.is_empty() {
        return Err("no character dominates enough of its peers".into());
    }
    let best = details.iter().map(|d| d.score).fold(0.0, f64::max);
    let model = if best == 1.0 { "Full domination" } else { "Partial domination" };
    let other = &rs.axes[1 - axis];
    let id = format!("dominance/{}", a.feature);
    let mut h = holistic(id, DOMINANCE, PEER_DOMINANCE, model.into(), DOMINATED_PEERS, best, measure_ref(&rs.measure));
    h.supportive_explanators = vec![
        Explanator::new("peer axis", "among peers of", a.feature.clone()),
        Explanator::new("slice axis", "across every", other.feature.clone()),
    ];
    h.details = details;
    Ok(h)
}

/// The character's marginal for additive aggregates, else the mean of its
/// present cells.
fn character_value(rs: &ResultSet, axis: usize, i: usize) -> f64 {
    if let Some(Some(m)) = rs.marginals(axis).map(|m| m[i]) {
        return m;
    }
    let other = rs.axes[1 - axis].len();
    let present: Vec<f64> = (0..other)
        .filter_map(|b| if axis == 0 { rs.cell(&[i, b]) } else { rs.cell(&[b, i]) })
        .collect();
    present.iter().sum::<f64>() / present.len().max(1) as f64
}

/// The series the time-oriented detectors read along `axis`: marginals for
/// SUM, the cells themselves for a single grouper.
fn axis_series(rs: &ResultSet, axis: usize) -> Result<SeriesView, Skip> {
    if rs.arity() == 1 && rs.aggregate() != AggregateFunction::Sum {
        let a = &rs.axes[0];
        let mut points = Vec::new();
        let mut missing = Vec::new();
        for (i, c) in a.characters.iter().enumerate() {
            match rs.cell(&[i]) {
                Some(v) => points.push((c.clone(), v)),
                None => missing.push(c.clone()),
            }
        }
        return Ok(SeriesView { feature: a.feature.clone(), temporal: a.temporal, points, missing });
    }
    marginal_series(rs, axis).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Extraction {
    pub highlights: Vec<HolisticHighlight>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Extraction {
    fn record(&mut self, detector: DetectorKind, target: &str, outcome: Result<HolisticHighlight, Skip>) {
        match outcome {
            Ok(h) => self.highlights.push(h),
            Err(message) => self.diagnostics.push(Diagnostic {
                detector: detector.name().into(),
                target: target.into(),
                message,
            }),
        }
    }
}

/// Numeric measures of the dataset in name order.
fn numeric_measures<'a>(dataset: &Dataset, catalog: &'a Catalog) -> Vec<&'a MeasureType> {
    catalog
        .measures
        .values()
        .filter(|m| dataset.schema.feature(&m.name).is_some_and(|f| f.kind == FeatureKind::Numeric))
        .collect()
}

/// Runs every enabled detector over every applicable target. Output is
/// ordered by detector name, then axis, then measure; per-target failures
/// become diagnostics.
pub fn run_all(
    dataset: &Dataset,
    catalog: &Catalog,
    rs: &ResultSet,
    cfg: &DetectorConfig,
    timestamp: Option<&str>,
) -> Extraction {
    let mut out = Extraction::default();
    let temporal_axes: Vec<usize> = (0..rs.arity()).filter(|&i| rs.axes[i].temporal).collect();
    let facts = filtered_facts(dataset, &rs.spec.filters);
    let measures = numeric_measures(dataset, catalog);

    for &kind in &cfg.enabled {
        match kind {
            DetectorKind::Correlation => {
                for (i, a) in measures.iter().enumerate() {
                    for b in &measures[i + 1..] {
                        let (x, y): (Vec<f64>, Vec<f64>) = facts
                            .iter()
                            .filter_map(|f| Some((f.get(&a.name).as_f64()?, f.get(&b.name).as_f64()?)))
                            .unzip();
                        let target = format!("{}~{}", a.name, b.name);
                        out.record(kind, &target, detect_correlation(&x, &y, (a, b), cfg));
                    }
                }
            }
            DetectorKind::Distribution => {
                if let Some(m) = catalog.measure(&rs.spec.measure) {
                    let values: Vec<f64> = facts.iter().filter_map(|f| f.get(&m.name).as_f64()).collect();
                    out.record(kind, &m.name, detect_distribution(&values, m, cfg));
                }
            }
            DetectorKind::Dominance => {
                if rs.arity() != 2 {
                    out.record(kind, &rs.axes[0].feature, Err("dominance needs two groupers".into()));
                    continue;
                }
                for axis in 0..2 {
                    out.record(kind, &rs.axes[axis].feature, detect_dominance(rs, axis, cfg));
                }
            }
            DetectorKind::MegaContributor => {
                for axis in 0..rs.arity() {
                    out.record(kind, &rs.axes[axis].feature, detect_mega_contributors(rs, axis, cfg));
                }
            }
            DetectorKind::Modality | DetectorKind::Seasonality | DetectorKind::Trend => {
                for &axis in &temporal_axes {
                    let target = &rs.axes[axis].feature;
                    let outcome = axis_series(rs, axis).and_then(|s| match kind {
                        DetectorKind::Modality => detect_modality(&s, &rs.measure, cfg),
                        DetectorKind::Seasonality => detect_seasonality(&s, &rs.measure, cfg),
                        _ => detect_trend(&s, &rs.measure, cfg),
                    });
                    out.record(kind, target, outcome);
                }
            }
            DetectorKind::Topk => out.record(kind, "cells", detect_topk(rs, cfg)),
        }
    }

    let query_digest = digest_json(&rs.spec);
    let dataset_digest = digest_json(dataset);
    for h in &mut out.highlights {
        h.provenance.query_spec_digest = query_digest.clone();
        h.provenance.dataset_digest = dataset_digest.clone();
        h.provenance.timestamp = timestamp.map(str::to_string);
    }
    out
}
