//! Extraction, structuring and narration of highlights: structured testimonies
//! of archetype statistical properties found in multidimensional data.

pub mod detectors;
pub mod expr;
pub mod highlight;
pub mod ingest;
pub mod model;
pub mod narrate;
pub mod pipeline;
pub mod profile;
pub mod query;
pub mod stats;
