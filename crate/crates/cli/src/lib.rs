//! Scenario runner and report records for the `jcone` command line tool.
//!
//! A scenario is a TOML file naming a model, an optional form field and a
//! list of analyses; running it produces one JSON [`ReportRecord`].

pub mod analyses;
pub mod record;
pub mod scenario;

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

pub use record::{emit_series, AnalysisRecord, Provenance, ReportRecord, Series};
pub use scenario::{AnalysisSpec, FormSpec, ModelSpec, Scenario, TolSpec};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("no series: {0}")]
    NoSeries(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// At least one analysis raised an error.
    pub const ANALYSIS_ERROR: i32 = 1;
    /// Bad configuration, usage or I/O.
    pub const USAGE: i32 = 2;
}

/// Runs the analyses accepted by `filter`, in file order.
pub fn run_filtered(scenario: &Scenario, filter: impl Fn(&AnalysisSpec) -> bool) -> Result<ReportRecord, CliError> {
    scenario.validate()?;
    let started = Instant::now();
    let ctx = analyses::Context {
        model: scenario.model.build()?,
        form: scenario.form.as_ref(),
        tol: scenario.tolerances.map(|t| t.tolerances()),
        seed: scenario.seed,
    };
    let records: Vec<AnalysisRecord> = scenario.analyses.iter().filter(|a| filter(a)).map(|a| analyses::run(&ctx, a)).collect();
    Ok(ReportRecord {
        scenario: scenario.id.clone(),
        errored: records.iter().any(|r| r.error.is_some()),
        analyses: records,
        provenance: Provenance {
            tool: record::TOOL.into(),
            version: record::VERSION.into(),
            tolerances: scenario.tolerances,
            seed: scenario.seed,
            wall_time_s: Some(started.elapsed().as_secs_f64()),
        },
    })
}

pub fn run_loaded(scenario: &Scenario) -> Result<ReportRecord, CliError> {
    run_filtered(scenario, |_| true)
}

pub fn run_scenario(path: &Path) -> Result<ReportRecord, CliError> {
    run_loaded(&Scenario::load(path)?)
}
