//! Text rendering of highlights: one sentence per highlight from a template,
//! and a summary grouped around the characters mentioned most often.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::highlight::{format_value, ElementaryHighlight, HighlightCatalog, HolisticHighlight, ScoreTypeRegistry};
use crate::model::CharacterRef;

pub const EMPTY_SUMMARY: &str = "No noteworthy highlights were detected.";

pub const DEFAULT_HOLISTIC: &str = "The {HighlightType} for {MainMeasure}, tested via {Algorithm}, {SupportiveRoles}, \
fits under the {Model} model with {ScoreType} and value {ScoreValue}.";

pub const DEFAULT_ELEMENTARY: &str =
    "{CharacterSet} with {Measure} = {MeasureValue} serves as {HighlightType} with {ScoreType} = {ScoreValue}.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NarrateError {
    #[error("placeholder `{{{0}}}` cannot be bound from a highlight")]
    UnbindablePlaceholder(String),
    #[error("unterminated placeholder at offset {0}")]
    Unterminated(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Category {
    Geography,
    Time,
    Other,
}

/// The `templates` section of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct NarrativeTemplate {
    pub holistic_pattern: String,
    pub elementary_pattern: String,
    /// Order in which protagonist groups are presented, by category.
    pub category_order: Vec<Category>,
    /// Character type names containing one of these (case-insensitively)
    /// count as geography.
    pub geography_keywords: Vec<String>,
    pub time_keywords: Vec<String>,
}

impl Default for NarrativeTemplate {
    fn default() -> Self {
        let words = |w: &[&str]| w.iter().map(|s| s.to_string()).collect();
        Self {
            holistic_pattern: DEFAULT_HOLISTIC.into(),
            elementary_pattern: DEFAULT_ELEMENTARY.into(),
            category_order: vec![Category::Geography, Category::Time, Category::Other],
            geography_keywords: words(&[
                "city", "country", "region", "location", "place", "state", "store", "area", "island", "geo",
            ]),
            time_keywords: words(&["time", "month", "date", "year", "day", "week", "quarter", "period"]),
        }
    }
}

impl NarrativeTemplate {
    pub fn category(&self, character_type: &str) -> Category {
        let t = character_type.to_lowercase();
        let hit = |words: &[String]| words.iter().any(|w| t.contains(&w.to_lowercase()));
        if hit(&self.geography_keywords) {
            Category::Geography
        } else if hit(&self.time_keywords) {
            Category::Time
        } else {
            Category::Other
        }
    }

    fn category_rank(&self, c: Category) -> usize {
        self.category_order.iter().position(|x| *x == c).unwrap_or(self.category_order.len())
    }

    /// Checks both patterns against the placeholders a highlight can bind.
    pub fn check(&self) -> Result<(), NarrateError> {
        fill(&self.holistic_pattern, |name| HOLISTIC_SLOTS.contains(&name).then(String::new))?;
        fill(&self.elementary_pattern, |name| ELEMENTARY_SLOTS.contains(&name).then(String::new))?;
        Ok(())
    }
}

const HOLISTIC_SLOTS: [&str; 7] =
    ["HighlightType", "MainMeasure", "Algorithm", "SupportiveRoles", "Model", "ScoreType", "ScoreValue"];
const ELEMENTARY_SLOTS: [&str; 6] =
    ["CharacterSet", "Measure", "MeasureValue", "HighlightType", "ScoreType", "ScoreValue"];

fn fill(pattern: &str, bind: impl Fn(&str) -> Option<String>) -> Result<String, NarrateError> {
    let mut out = String::with_capacity(pattern.len() + 64);
    let mut rest = pattern;
    let mut offset = 0;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..].find('}').ok_or(NarrateError::Unterminated(offset + open))? + open;
        let name = &rest[open + 1..close];
        out.push_str(&bind(name).ok_or_else(|| NarrateError::UnbindablePlaceholder(name.to_string()))?);
        offset += close + 1;
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Drops an empty list placeholder together with one adjoining ", ".
fn drop_slot(pattern: &str, slot: &str) -> String {
    let token = format!("{{{slot}}}");
    for variant in [format!(", {token}"), format!("{token}, "), token.clone()] {
        if pattern.contains(&variant) {
            return pattern.replacen(&variant, "", 1);
        }
    }
    pattern.to_string()
}

pub fn render_holistic(
    h: &HolisticHighlight,
    t: &NarrativeTemplate,
    scores: &ScoreTypeRegistry,
) -> Result<String, NarrateError> {
    let roles: Vec<String> =
        h.supportive_explanators.iter().map(|e| format!("{} {}", e.text, e.feature)).collect();
    let pattern = if roles.is_empty() {
        drop_slot(&t.holistic_pattern, "SupportiveRoles")
    } else {
        t.holistic_pattern.clone()
    };
    fill(&pattern, |name| {
        Some(match name {
            "HighlightType" => h.highlight_type.clone(),
            "MainMeasure" => h.measure.name.clone(),
            "Algorithm" => h.algorithm.clone(),
            "SupportiveRoles" => roles.join("; "),
            "Model" => h.model.clone(),
            "ScoreType" => h.score_type.clone(),
            "ScoreValue" => scores.format(&h.score_type, h.score),
            _ => return None,
        })
    })
}

/// `parent` supplies the measure the detail's value belongs to.
pub fn render_elementary(
    parent: &HolisticHighlight,
    e: &ElementaryHighlight,
    t: &NarrativeTemplate,
    scores: &ScoreTypeRegistry,
) -> Result<String, NarrateError> {
    let set: Vec<&str> = e.characters.iter().map(|c| c.character.description.as_str()).collect();
    fill(&t.elementary_pattern, |name| {
        Some(match name {
            "CharacterSet" => format!("({})", set.join(", ")),
            "Measure" => parent.measure.name.clone(),
            "MeasureValue" => format_value(e.measure_value),
            "HighlightType" => e.highlight_type.clone(),
            "ScoreType" => e.score_type.clone(),
            "ScoreValue" => scores.format(&e.score_type, e.score),
            _ => return None,
        })
    })
}

/// One highlight's full text: the holistic sentence followed by one
/// sentence per detail.
pub fn render_highlight(
    h: &HolisticHighlight,
    t: &NarrativeTemplate,
    scores: &ScoreTypeRegistry,
) -> Result<String, NarrateError> {
    let mut parts = vec![render_holistic(h, t, scores)?];
    for d in &h.details {
        parts.push(render_elementary(h, d, t, scores)?);
    }
    Ok(parts.join(" "))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryItem {
    /// Provenance id of the highlight rendered here.
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section {
    pub protagonist: Option<CharacterRef>,
    pub header: Option<String>,
    pub items: Vec<SummaryItem>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Summary {
    pub sections: Vec<Section>,
}

impl Summary {
    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().flat_map(|s| s.items.iter().map(|i| i.id.as_str()))
    }

    /// A single paragraph.
    pub fn to_text(&self) -> String {
        if self.sections.is_empty() {
            return EMPTY_SUMMARY.to_string();
        }
        let parts: Vec<String> = self
            .sections
            .iter()
            .map(|s| {
                let body = s.items.iter().map(|i| i.text.as_str()).collect::<Vec<_>>().join(" ");
                match &s.header {
                    Some(h) => format!("{h}{body}"),
                    None => body,
                }
            })
            .collect();
        parts.join(" ")
    }

    pub fn to_markdown(&self) -> String {
        if self.sections.is_empty() {
            return format!("{EMPTY_SUMMARY}\n");
        }
        let mut out = String::new();
        for (n, s) in self.sections.iter().enumerate() {
            if n > 0 {
                out.push('\n');
            }
            if let Some(h) = &s.header {
                out.push_str(&format!("**{}**\n\n", h.trim_end().trim_end_matches(':')));
            }
            for i in &s.items {
                out.push_str(&format!("- {}\n", i.text));
            }
        }
        out
    }
}

/// Characters appearing in at least this many details lead a group.
pub const PROTAGONIST_MENTIONS: usize = 2;

/// Groups highlights around protagonists: geography groups before time
/// groups before others (configurable), then by descending mention count.
/// A highlight joins the first group whose protagonist it mentions; the
/// rest follow ungrouped, and negative results come last.
pub fn compose_summary(
    highlights: &[HolisticHighlight],
    catalog: &HighlightCatalog,
    t: &NarrativeTemplate,
) -> Result<Summary, NarrateError> {
    let mut mentions: BTreeMap<&CharacterRef, usize> = BTreeMap::new();
    for h in highlights {
        for d in &h.details {
            for c in &d.characters {
                *mentions.entry(&c.character).or_default() += 1;
            }
        }
    }
    let mut protagonists: Vec<(&CharacterRef, usize)> =
        mentions.into_iter().filter(|(_, n)| *n >= PROTAGONIST_MENTIONS).collect();
    protagonists.sort_by(|(a, na), (b, nb)| {
        t.category_rank(t.category(&a.character_type))
            .cmp(&t.category_rank(t.category(&b.character_type)))
            .then(nb.cmp(na))
            .then_with(|| a.cmp(b))
    });

    let mut grouped: Vec<Vec<SummaryItem>> = vec![Vec::new(); protagonists.len()];
    let mut loose = Vec::new();
    let mut negative = Vec::new();
    for h in order_jointly(highlights, catalog) {
        let item = SummaryItem { id: h.id().to_string(), text: render_highlight(h, t, &catalog.score_types)? };
        if catalog.is_negative(h) {
            negative.push(item);
            continue;
        }
        let mentioned = h.mentioned_characters();
        match protagonists.iter().position(|(p, _)| mentioned.contains(p)) {
            Some(g) => grouped[g].push(item),
            None => loose.push(item),
        }
    }

    let mut sections: Vec<Section> = protagonists
        .iter()
        .zip(grouped)
        .filter(|(_, items)| !items.is_empty())
        .map(|((p, _), items)| Section {
            protagonist: Some((*p).clone()),
            header: Some(format!("In terms of {}, focusing on {}: ", p.character_type, p.description)),
            items,
        })
        .collect();
    for items in [loose, negative] {
        if !items.is_empty() {
            sections.push(Section { protagonist: None, header: None, items });
        }
    }
    Ok(Summary { sections })
}

/// Input order, except that a modality result is moved right behind a
/// positive trend along the same feature: a monotone series always shows
/// an endpoint peak, and the two read correctly only together.
fn order_jointly<'a>(highlights: &'a [HolisticHighlight], catalog: &HighlightCatalog) -> Vec<&'a HolisticHighlight> {
    let ordering = |h: &HolisticHighlight| {
        h.supportive_explanators.iter().find(|e| e.role == "ordering").map(|e| e.feature.clone())
    };
    let trend_features: Vec<String> = highlights
        .iter()
        .filter(|h| h.highlight_type == crate::highlight::names::TREND && !catalog.is_negative(h))
        .filter_map(ordering)
        .collect();
    let follows_trend = |h: &HolisticHighlight| {
        h.highlight_type == crate::highlight::names::MODALITY
            && ordering(h).is_some_and(|f| trend_features.contains(&f))
    };
    let mut out = Vec::with_capacity(highlights.len());
    for h in highlights.iter().filter(|h| !follows_trend(h)) {
        out.push(h);
        if h.highlight_type == crate::highlight::names::TREND && !catalog.is_negative(h) {
            let f = ordering(h);
            out.extend(highlights.iter().filter(|m| follows_trend(m) && ordering(m) == f));
        }
    }
    out
}
