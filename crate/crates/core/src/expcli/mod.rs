//! Experiment runner: configuration, dispatch and persistence of results.

mod config;
mod experiments;
mod record;

use std::time::Instant;

pub use config::*;
pub use record::*;

use crate::error::Result;

/// Run `config`'s experiment and return its record without touching disk.
pub fn execute(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let start = Instant::now();
    let out = experiments::dispatch(config).map_err(|e| e.context(format!("experiment {}", config.experiment)))?;
    Ok(ResultRecord {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        experiment: config.experiment.name().to_string(),
        config: config.clone(),
        metrics: out.metrics,
        diagnostics: out.diagnostics,
        assertions: out.assertions,
        artifacts: Vec::new(),
        wall_time_s: start.elapsed().as_secs_f64(),
        code_version: code_version(),
        plot: out.plot,
    })
}

/// Run the experiment and write `record.json` plus CSV plot data into
/// `config.output_dir`.
pub fn run(config: &ExperimentConfig) -> Result<ResultRecord> {
    let mut record = execute(config)?;
    record.artifacts = emit_plotdata(&record, &config.output_dir)?;
    write_record(&record, &config.output_dir)?;
    Ok(record)
}
