//! File formats, ingestion, configuration and the stage runners for the
//! `polytrinity` command-line tool.

pub mod config;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod io;
pub mod predictors;
pub mod stages;

pub use config::PipelineConfig;
pub use error::{PipelineError, Result};
pub use stages::Context;
