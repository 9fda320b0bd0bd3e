//! Experiment runner behind the `excursion` binary.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::json;

pub mod config;
pub mod experiments;
pub mod output;
pub mod report;

use config::{ConfigError, ExperimentConfig};
use experiments::RunOutput;
use output::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

/// A CSV file whose columns differ from the expected schema.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaMismatch(pub String);

impl fmt::Display for SchemaMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "schema mismatch: {}", self.0)
    }
}

impl std::error::Error for SchemaMismatch {}

/// Report mode found estimates above an upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation(pub usize);

impl fmt::Display for BoundViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} estimate(s) exceed an upper bound by more than 4 stderr", self.0)
    }
}

impl std::error::Error for BoundViolation {}

pub fn exit_code(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<ConfigError>().is_some() || e.downcast_ref::<SchemaMismatch>().is_some() {
        EXIT_CONFIG
    } else if e.downcast_ref::<BoundViolation>().is_some() {
        EXIT_VIOLATION
    } else {
        EXIT_RUNTIME
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ExperimentConfig::from_json(&text)?)
}

/// Runs `config` and writes the artifacts into `out`.
pub fn run_to_dir(config: &ExperimentConfig, out: &Path, svg: bool) -> Result<RunOutput> {
    let start = Instant::now();
    let mut result = experiments::run(config)?;
    sort_estimates(&mut result.estimates);
    sort_predictions(&mut result.predictions);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_csv(&out.join(ESTIMATES_FILE), &result.estimates, &ESTIMATE_HEADER)?;
    write_csv(&out.join(PREDICTIONS_FILE), &result.predictions, &PREDICTION_HEADER)?;
    if svg && !result.plot.is_empty() {
        let title = format!("{} ({:?}): estimate / prediction", config.kind.as_str(), config.model.family);
        write_text(&out.join(PLOT_FILE), &ratio_svg(&title, &result.plot))?;
    }
    let summary = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "records": result.records,
    });
    write_text(&out.join(SUMMARY_FILE), &serde_json::to_string_pretty(&summary)?)?;
    Ok(result)
}
