//! JSON/CSV serialization of run results. Floats are written with Rust's
//! shortest-roundtrip formatting, so identical runs produce byte-identical
//! files.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::propagation::{EchoReport, FieldEnvelope};
use crate::Result;

/// JSON view of an [`EchoReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: String,
    pub efficiency: f64,
    pub peak_time_s: Option<f64>,
    pub expected_peak_time_s: Option<f64>,
    pub shape_fidelity: Option<f64>,
    pub echo_carrier: String,
    pub input_energy: f64,
    pub transmitted_energy: f64,
    pub echo_energy: f64,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn new(variant: &str, report: &EchoReport) -> Self {
        RunReport {
            variant: variant.to_string(),
            efficiency: report.efficiency,
            peak_time_s: report.peak_time,
            expected_peak_time_s: report.expected_peak_time,
            shape_fidelity: report.shape_fidelity,
            echo_carrier: report.echo.carrier.label().to_string(),
            input_energy: report.input.energy(),
            transmitted_energy: report.transmitted.energy(),
            echo_energy: report.echo.energy(),
            warnings: report.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// CSV with columns `time_s,re,im`.
pub fn envelope_csv(envelope: &FieldEnvelope) -> String {
    let mut out = String::from("time_s,re,im\n");
    for (k, s) in envelope.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", envelope.time(k), s.re, s.im);
    }
    out
}

/// One sweep result row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub efficiency_sim: f64,
    pub efficiency_oracle: f64,
    pub abs_error: f64,
}

/// CSV with columns `value,efficiency_sim,efficiency_oracle,abs_error`, one
/// row per sweep value in input order.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,efficiency_sim,efficiency_oracle,abs_error\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.value, r.efficiency_sim, r.efficiency_oracle, r.abs_error
        );
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}
