//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Built without the libtest harness so the report stays readable.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::oracles::{brute_dominance, brute_kendall, brute_topk, random_grid, result, shapiro_references, transpose};
use highlighter::detectors::{detect_dominance, detect_topk, run_all, DetectorConfig, DetectorKind};
use highlighter::highlight::{
    canonicalize, deserialize_highlights, serialize_document, validate_highlight, HighlightCatalog, HolisticHighlight,
};
use highlighter::model::Value;
use highlighter::narrate::{compose_summary, NarrativeTemplate};
use highlighter::query::execute_groupby;
use highlighter::stats::{kendall_tau, mann_kendall, shapiro_wilk, spearman};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    }};
}

fn find<'a>(hs: &'a [HolisticHighlight], id: &str) -> Result<&'a HolisticHighlight, String> {
    hs.iter().find(|h| h.provenance.id == id).ok_or_else(|| format!("missing highlight {id}"))
}

/// The single detail of `h` as (description, value, score).
fn only_detail(h: &HolisticHighlight) -> Result<(String, f64, f64), String> {
    ensure!(h.details.len() == 1, "{}: expected one detail, got {}", h.provenance.id, h.details.len());
    let d = &h.details[0];
    ensure!(d.characters.len() == 1, "{}: expected one character", h.provenance.id);
    Ok((d.characters[0].character.description.clone(), d.measure_value, d.score))
}

fn table1_reproduction() -> Outcome {
    let config = common::table1_config();
    let spec = common::table1_query();
    let start = Instant::now();
    let run = highlighter::pipeline::run(&config, &spec, None).map_err(|e| e.to_string())?;
    let catalog = HighlightCatalog::default();
    serialize_document(&run.extraction.highlights, &run.extraction.diagnostics, &catalog, true)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");

    let hs = &run.extraction.highlights;
    let ids: Vec<_> = hs.iter().map(|h| h.provenance.id.as_str()).collect();
    let expected = [
        "dominance/City",
        "dominance/Month",
        "megaContributor/City",
        "megaContributor/Month",
        "modality/Month",
        "trend/Month",
    ];
    ensure!(ids == expected, "highlight set {ids:?}");

    let dom_city = find(hs, "dominance/City")?;
    ensure!(dom_city.model == "Full domination", "city dominance model {}", dom_city.model);
    let (who, _, score) = only_detail(dom_city)?;
    ensure!(who == "Athens" && score == 1.0, "city dominator {who} {score}");

    let (who, _, score) = only_detail(find(hs, "dominance/Month")?)?;
    ensure!(who == "May 2023" && score == 1.0, "month dominator {who} {score}");

    let (who, _, score) = only_detail(find(hs, "megaContributor/City")?)?;
    ensure!(who == "Athens" && (score - 0.75).abs() <= 1e-9, "city mega-contributor {who} {score}");

    let (who, _, score) = only_detail(find(hs, "megaContributor/Month")?)?;
    ensure!(who == "May 2023" && (score - 1280.0 / 2800.0).abs() <= 1e-9, "month mega-contributor {who} {score}");

    let modality = find(hs, "modality/Month")?;
    ensure!(modality.model == "Unimodal", "modality model {}", modality.model);
    let (who, value, _) = only_detail(modality)?;
    ensure!(who == "May 2023" && value == 1280.0, "peak {who} {value}");

    let trend = find(hs, "trend/Month")?;
    ensure!(trend.model == "No trend" && trend.algorithm == "Mann-Kendall", "trend {} via {}", trend.model, trend.algorithm);
    let s = trend.provenance.kernel.as_ref().map(|k| k.statistic);
    ensure!(s == Some(1.0), "Mann-Kendall S {s:?}");

    let diag = &run.extraction.diagnostics;
    ensure!(
        diag.iter().any(|d| d.detector == "seasonality" && d.target == "Month" && d.message.contains("n=3")),
        "no insufficient-data diagnostic for seasonality: {diag:?}"
    );
    Ok(format!("6 highlights in {elapsed:.1?}"))
}

fn marginal_consistency() -> Outcome {
    let run = common::table1_run();
    let rs = &run.result;
    let month: Vec<_> = rs.marginals(1).ok_or("no month marginals")?.to_vec();
    let city: Vec<_> = rs.marginals(0).ok_or("no city marginals")?.to_vec();
    ensure!(month == [Some(715.0), Some(1280.0), Some(805.0)], "month marginals {month:?}");
    ensure!(city == [Some(2100.0), Some(185.0), Some(245.0), Some(270.0)], "city marginals {city:?}");
    ensure!(rs.grand_total() == Some(2800.0), "grand total {:?}", rs.grand_total());
    Ok("exact".into())
}

fn kernel_oracles() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x6b656e64);
    for _ in 0..500 {
        let n = rng.random_range(3..=8);
        let pool = rng.random_range(2..=10);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..pool) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..pool) as f64).collect();
        match (brute_kendall(&x, &y), kendall_tau(&x, &y)) {
            (Some(e), Ok(got)) => ensure!(got.statistic == e, "Kendall {} vs {e} on {x:?} {y:?}", got.statistic),
            (None, Err(_)) => {}
            (e, got) => return Err(format!("Kendall disagreement {e:?} vs {got:?}")),
        }
    }

    let rho = spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).map_err(|e| e.to_string())?.statistic;
    ensure!((rho + 0.5).abs() <= 1e-12, "Spearman {rho}");

    let mut rng = StdRng::seed_from_u64(0x6d6b);
    for _ in 0..200 {
        let n = rng.random_range(3..40);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..15) as f64).collect();
        let rev: Vec<f64> = s.iter().rev().copied().collect();
        let a = mann_kendall(&s).map_err(|e| e.to_string())?.statistic;
        let b = mann_kendall(&rev).map_err(|e| e.to_string())?.statistic;
        ensure!(a == -b, "Mann-Kendall {a} vs reversed {b}");
    }

    let refs = shapiro_references();
    ensure!(refs.len() >= 3, "only {} Shapiro-Wilk references", refs.len());
    for (name, r) in &refs {
        let got = shapiro_wilk(&r.x).map_err(|e| e.to_string())?;
        let p = got.p_value.unwrap_or(f64::NAN);
        ensure!((got.statistic - r.w).abs() < 1e-3 && (p - r.p).abs() < 1e-3, "{name}: W {} p {p}", got.statistic);
    }
    Ok(format!("Kendall 500, Mann-Kendall 200, Shapiro-Wilk {}", refs.len()))
}

fn brute_force_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xacce);
    let cfg = DetectorConfig::default();
    let mut compared = 0;
    for _ in 0..200 {
        let grid = random_grid(&mut rng);
        if !grid.iter().flatten().any(Option::is_some) {
            continue;
        }
        let rs = result(&grid);
        for (axis, g) in [(0, grid.clone()), (1, transpose(&grid))] {
            let expected = brute_dominance(&g, cfg.partial_dominance_floor);
            let got: Vec<(usize, f64)> = match detect_dominance(&rs, axis, &cfg) {
                Ok(h) => h
                    .details
                    .iter()
                    .map(|d| (d.characters[0].character.id[1..].parse().unwrap(), d.score))
                    .collect(),
                Err(_) => Vec::new(),
            };
            ensure!(got == expected, "dominance axis {axis} on {grid:?}: {got:?} vs {expected:?}");
        }
        let k = rng.random_range(1..=12);
        let cfg = DetectorConfig { k, ..Default::default() };
        let h = detect_topk(&rs, &cfg)?;
        let got: Vec<_> = h
            .details
            .iter()
            .map(|d| (d.characters[0].character.id.clone(), d.characters[1].character.id.clone(), d.measure_value, d.score))
            .collect();
        ensure!(got == brute_topk(&grid, k), "top-{k} on {grid:?}");
        compared += 1;
    }
    Ok(format!("{compared} grids"))
}

fn argmax_invariance() -> Outcome {
    const FACTOR: f64 = 7.3;
    let base = common::table1_run();
    let cfg = DetectorConfig::only(&DetectorKind::ALL);
    let mut scaled = base.loaded.dataset.clone();
    for f in &mut scaled.facts {
        let v = f.get("Sales").as_f64().ok_or("non-numeric sales")?;
        f.set("Sales", Value::Number(v * FACTOR));
    }
    let catalog = &base.loaded.catalog;
    let spec = common::table1_query();
    let extract = |ds| -> Result<Vec<HolisticHighlight>, String> {
        let rs = execute_groupby(ds, catalog, &spec).map_err(|e| e.to_string())?;
        Ok(run_all(ds, catalog, &rs, &cfg, None).highlights)
    };
    let a = extract(&base.loaded.dataset)?;
    let b = extract(&scaled)?;
    ensure!(a.len() == b.len(), "{} highlights vs {} after scaling", a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        let id = &x.provenance.id;
        ensure!(id == &y.provenance.id, "order changed: {id} vs {}", y.provenance.id);
        ensure!(x.model == y.model, "{id}: model {} vs {}", x.model, y.model);
        ensure!(x.details.len() == y.details.len(), "{id}: detail count changed");
        let scale_free = x.score_type != "p-value";
        ensure!(!scale_free || (x.score - y.score).abs() <= 1e-9, "{id}: score {} vs {}", x.score, y.score);
        for (d, e) in x.details.iter().zip(&y.details) {
            let who = |h: &highlighter::highlight::ElementaryHighlight| {
                h.characters.iter().map(|c| c.character.clone()).collect::<Vec<_>>()
            };
            ensure!(who(d) == who(e), "{id}: detail characters changed");
            ensure!((d.score - e.score).abs() <= 1e-9, "{id}: detail score {} vs {}", d.score, e.score);
            let expected = d.measure_value * FACTOR;
            ensure!(
                (e.measure_value - expected).abs() <= 1e-9 * expected.abs().max(1.0),
                "{id}: value {} did not scale to {expected}",
                e.measure_value
            );
        }
    }
    Ok(format!("{} highlights compared", a.len()))
}

fn structural_validity() -> Outcome {
    let catalog = HighlightCatalog::default();
    let first = common::table1_run().extraction;
    for h in &first.highlights {
        let report = validate_highlight(h, &catalog);
        ensure!(report.is_empty(), "{}: {:?}", h.provenance.id, report.reasons());
    }
    let json = serialize_document(&first.highlights, &first.diagnostics, &catalog, true).map_err(|e| e.to_string())?;
    let back = deserialize_highlights(&json).map_err(|e| e.to_string())?;
    let canonical: Vec<_> = first.highlights.iter().map(canonicalize).collect();
    ensure!(back.highlights == canonical, "round trip changed the highlights");
    ensure!(back.diagnostics == first.diagnostics, "round trip changed the diagnostics");
    let second = common::table1_run().extraction;
    let again = serialize_document(&second.highlights, &second.diagnostics, &catalog, true).map_err(|e| e.to_string())?;
    ensure!(json == again, "two runs differ");
    Ok(format!("{} bytes, identical", json.len()))
}

/// True when the items satisfying `pred` form one unbroken run.
fn contiguous(ids: &[&str], pred: impl Fn(&str) -> bool) -> bool {
    let hits: Vec<usize> = ids.iter().enumerate().filter(|(_, id)| pred(id)).map(|(i, _)| i).collect();
    hits.windows(2).all(|w| w[1] == w[0] + 1)
}

fn narrative() -> Outcome {
    let run = common::table1_run();
    let hs = &run.extraction.highlights;
    let catalog = HighlightCatalog::default();
    let summary = compose_summary(hs, &catalog, &NarrativeTemplate::default()).map_err(|e| e.to_string())?;
    let ids: Vec<&str> = summary.item_ids().collect();
    let mentions = |id: &str, who: &str| {
        hs.iter()
            .find(|h| h.provenance.id == id)
            .is_some_and(|h| h.mentioned_characters().iter().any(|c| c.description == who))
    };
    for (who, pair) in [("Athens", ["dominance/City", "megaContributor/City"]), ("May 2023", ["dominance/Month", "megaContributor/Month"])] {
        let pos: Vec<_> = pair.iter().map(|p| ids.iter().position(|i| i == p)).collect();
        ensure!(
            matches!(pos[..], [Some(a), Some(b)] if b == a + 1),
            "{who}'s facts not adjacent in {ids:?}"
        );
        ensure!(contiguous(&ids, |id| mentions(id, who)), "{who} mentions are split in {ids:?}");
    }
    let text = summary.to_text();
    ensure!(text.contains("75"), "no 75 in summary");
    ensure!(text.contains("No trend"), "no no-trend sentence");
    ensure!(!text.contains('{') && !text.contains('}'), "unresolved placeholder in {text}");
    Ok(format!("{} items in {} sections", ids.len(), summary.sections.len()))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("table-1 reproduction", table1_reproduction),
        ("marginal consistency", marginal_consistency),
        ("kernel oracle suite", kernel_oracles),
        ("brute-force equivalence", brute_force_equivalence),
        ("argmax invariance", argmax_invariance),
        ("structural validity", structural_validity),
        ("narrative", narrative),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(note) => println!("PASS {}. {name} ({note})", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
