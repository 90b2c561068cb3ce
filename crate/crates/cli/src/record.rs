//! Report records (JSON) and plot-ready series.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::scenario::TolSpec;
use crate::CliError;

pub const TOOL: &str = "jcone";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub scenario: String,
    /// `true` when at least one analysis raised an error.
    pub errored: bool,
    pub analyses: Vec<AnalysisRecord>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub tolerances: Option<TolSpec>,
    pub seed: Option<u64>,
    /// Excluded from the deterministic payload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub id: String,
    pub kind: String,
    pub verdict: Option<String>,
    pub error: Option<String>,
    /// Unit of each numeric payload field (`time`, `1/time`, `1` ...).
    pub units: BTreeMap<String, String>,
    pub payload: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Series>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(columns: Vec<(&str, &str)>, rows: Vec<Vec<f64>>) -> Result<Self, String> {
        if rows.iter().any(|r| r.len() != columns.len()) {
            return Err("series row length does not match its columns".into());
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err("series contains non-finite values".into());
        }
        Ok(Self {
            columns: columns.iter().map(|c| c.0.to_string()).collect(),
            units: columns.iter().map(|c| c.1.to_string()).collect(),
            rows,
        })
    }
}

impl ReportRecord {
    /// The record without wall-clock data, as pretty JSON.
    pub fn deterministic_payload(&self) -> String {
        let mut copy = self.clone();
        copy.provenance.wall_time_s = None;
        serde_json::to_string_pretty(&copy).expect("records serialize")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(format!("report record: {e}")))
    }

    pub fn analysis(&self, id: &str) -> Option<&AnalysisRecord> {
        self.analyses.iter().find(|a| a.id == id)
    }

    /// One line per analysis.
    pub fn summary(&self) -> String {
        let mut out = format!("scenario {}\n", self.scenario);
        for a in &self.analyses {
            let status = match (&a.verdict, &a.error) {
                (_, Some(e)) => format!("ERROR {e}"),
                (Some(v), None) => v.clone(),
                (None, None) => "done".into(),
            };
            let _ = writeln!(out, "  {:<24} {:<18} {}", a.id, a.kind, status);
        }
        out
    }
}

/// Tab-separated columns with a `name [unit]` header row.
pub fn emit_series(record: &ReportRecord, analysis_id: &str) -> Result<String, CliError> {
    let analysis = record.analysis(analysis_id).ok_or_else(|| CliError::NoSeries(format!("no analysis `{analysis_id}`")))?;
    let series = analysis.series.as_ref().ok_or_else(|| CliError::NoSeries(format!("{} analysis `{analysis_id}` has no series", analysis.kind)))?;
    let mut out = String::new();
    let header: Vec<String> = series.columns.iter().zip(&series.units).map(|(c, u)| format!("{c} [{u}]")).collect();
    out.push_str(&header.join("\t"));
    out.push('\n');
    for row in &series.rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    Ok(out)
}
