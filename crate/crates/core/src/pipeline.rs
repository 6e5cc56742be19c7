//! End-to-end wiring: configuration file, dataset load, group-by query,
//! detectors. Errors are classified so callers can map them to exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detectors::{run_all, DetectorConfig, Extraction};
use crate::ingest::{load_dataset, DatasetConfig, IngestError, LoadedDataset};
use crate::narrate::NarrativeTemplate;
use crate::query::{execute_groupby, GroupBySpec, QueryError, ResultSet};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("query error: {0}")]
    Query(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) => 3,
            PipelineError::Query(_) => 4,
            PipelineError::Internal(_) => 5,
        }
    }
}

impl From<IngestError> for PipelineError {
    fn from(e: IngestError) -> Self {
        if e.is_config_error() {
            PipelineError::Config(e.to_string())
        } else {
            PipelineError::Data(e.to_string())
        }
    }
}

impl From<QueryError> for PipelineError {
    fn from(e: QueryError) -> Self {
        PipelineError::Query(e.to_string())
    }
}

/// The main configuration file: the dataset description plus optional
/// `detectors` and `templates` sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppConfig {
    #[serde(flatten)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub detectors: DetectorConfig,
    #[serde(default)]
    pub templates: NarrativeTemplate,
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read `{}`: {e}", path.display()))
}

/// Reads and checks a configuration file. Table paths are taken relative to
/// the file's directory.
pub fn load_config(path: &Path) -> Result<AppConfig, PipelineError> {
    let text = read(path).map_err(PipelineError::Config)?;
    let mut config: AppConfig = serde_json::from_str(&text)
        .map_err(|e| PipelineError::Config(format!("`{}`: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    config.dataset.rebase(&base);
    config.dataset.check().map_err(|e| PipelineError::Config(e.to_string()))?;
    config.detectors.validate().map_err(|e| PipelineError::Config(format!("detectors: {e}")))?;
    config.templates.check().map_err(|e| PipelineError::Config(format!("templates: {e}")))?;
    Ok(config)
}

pub fn load_query(path: &Path) -> Result<GroupBySpec, PipelineError> {
    let text = read(path).map_err(PipelineError::Query)?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Query(format!("`{}`: {e}", path.display())))
}

pub struct Run {
    pub loaded: LoadedDataset,
    pub result: ResultSet,
    pub extraction: Extraction,
}

pub fn run(config: &AppConfig, spec: &GroupBySpec, timestamp: Option<&str>) -> Result<Run, PipelineError> {
    let loaded = load_dataset(&config.dataset)?;
    let result = execute_groupby(&loaded.dataset, &loaded.catalog, spec)?;
    let extraction = run_all(&loaded.dataset, &loaded.catalog, &result, &config.detectors, timestamp);
    Ok(Run { loaded, result, extraction })
}
