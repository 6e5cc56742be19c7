use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use highlighter::highlight::{serialize_document, HighlightCatalog};
use highlighter::narrate::{compose_summary, Summary};
use highlighter::pipeline::{load_config, load_query, run, AppConfig, PipelineError};
use highlighter::profile::{profile_table, render_profile};

/// Extract, structure and narrate highlights from tabular data.
#[derive(Parser)]
#[command(name = "highlighter", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-column statistics and suggested roles for the fact table.
    Profile {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the detectors and write the highlight document as JSON.
    Highlights(RunArgs),
    /// Run the detectors and write a grouped textual summary.
    Narrate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Also write the highlight document here.
        #[arg(long)]
        highlights_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Markdown,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave the provenance timestamp empty so runs are byte-identical.
    #[arg(long)]
    no_provenance_timestamp: bool,
    /// Do not report absent properties ("No trend", ...).
    #[arg(long)]
    no_emit_negative: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    mega_contributor_threshold: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    partial_dominance_floor: Option<f64>,
    #[arg(long)]
    seasonality_threshold: Option<f64>,
}

impl RunArgs {
    /// Flags override the file, which overrides the defaults.
    fn apply(&self, config: &mut AppConfig) -> Result<(), PipelineError> {
        let d = &mut config.detectors;
        if self.no_emit_negative {
            d.emit_negative = false;
        }
        if let Some(k) = self.k {
            d.k = k;
        }
        if let Some(v) = self.mega_contributor_threshold {
            d.mega_contributor_threshold = v;
        }
        if let Some(v) = self.alpha {
            d.alpha = v;
        }
        if let Some(v) = self.partial_dominance_floor {
            d.partial_dominance_floor = v;
        }
        if let Some(v) = self.seasonality_threshold {
            d.seasonality_threshold = v;
        }
        d.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| PipelineError::Internal(format!("cannot write `{}`: {e}", p.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| PipelineError::Internal(format!("cannot write to standard output: {e}"))),
    }
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Profile { config, out } => {
            let config = load_config(&config)?;
            let profiles = profile_table(&config.dataset.fact_table)?;
            write_out(out.as_deref(), &render_profile(&profiles))
        }
        Command::Highlights(args) => {
            let (document, _) = extract(&args, false)?;
            write_out(args.out.as_deref(), &document)
        }
        Command::Narrate { run, format, highlights_out } => {
            let (document, summary) = extract(&run, true)?;
            if let Some(p) = &highlights_out {
                write_out(Some(p), &document)?;
            }
            let summary = summary.expect("requested");
            let text = match format {
                Format::Text => summary.to_text() + "\n",
                Format::Markdown => summary.to_markdown(),
            };
            write_out(run.out.as_deref(), &text)
        }
    }
}

fn extract(
    args: &RunArgs,
    narrate: bool,
) -> Result<(String, Option<Summary>), PipelineError> {
    let mut config = load_config(&args.config)?;
    args.apply(&mut config)?;
    let spec = load_query(&args.query)?;
    let timestamp = (!args.no_provenance_timestamp).then(|| chrono::Utc::now().to_rfc3339());
    let outcome = run(&config, &spec, timestamp.as_deref())?;
    for w in &outcome.loaded.warnings {
        eprintln!("warning: {w}");
    }
    for d in &outcome.extraction.diagnostics {
        eprintln!("note: {} on {}: {}", d.detector, d.target, d.message);
    }
    let catalog = HighlightCatalog::default();
    let highlights = &outcome.extraction.highlights;
    let mut document = serialize_document(highlights, &outcome.extraction.diagnostics, &catalog, true)
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    document.push('\n');
    let summary = if narrate {
        Some(compose_summary(highlights, &catalog, &config.templates).map_err(|e| PipelineError::Config(e.to_string()))?)
    } else {
        None
    };
    Ok((document, summary))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(5),
    }
}
