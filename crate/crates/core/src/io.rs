//! Scenario documents and tabular outputs.
//!
//! Scenarios are JSON:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "components": [{"name": "DSO", "unit_loss": 18}, ...],
//!   "stress_matrix": [[0.066, 0.164, 0.230, 0.263, 0.277], ...],
//!   "pf_target": 0.45,
//!   "loss_target": 6,
//!   "charging": {...},
//!   "optimizer": {...}
//! }
//! ```
//!
//! `stress_matrix` has one row per component. `charging` and `optimizer` are
//! optional; omitted optimizer fields take their defaults. Tables are CSV
//! with six decimal places; JSON outputs keep full precision.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::charging::ChargingSession;
use crate::error::{Error, Result};
use crate::maxent::{MultiplierPair, ValidityReport};
use crate::model::{validate_scenario, Component, FailureMatrix, RawScenario, Scenario};
use crate::optimizer::{ConvergenceReason, OptimizerOptions};
use crate::reliability::{ReliabilityCurve, WeakestComponentReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub components: Vec<Component>,
    pub stress_matrix: Vec<Vec<f64>>,
    pub pf_target: f64,
    pub loss_target: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charging: Option<ChargingSession>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerOptions>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub charging: Option<ChargingSession>,
    pub options: OptimizerOptions,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<LoadedScenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            path,
            location: format!(" (line {}, column {})", inner.line(), inner.column()),
            message: inner.to_string(),
        }
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse {
            path: "schema_version".into(),
            location: String::new(),
            message: format!(
                "unsupported schema version {}, expected {SCHEMA_VERSION}",
                file.schema_version
            ),
        });
    }
    let scenario = validate_scenario(&RawScenario {
        components: file.components,
        stress_matrix: file.stress_matrix,
        pf_target: file.pf_target,
        loss_target: file.loss_target,
    })?;
    if let Some(c) = &file.charging {
        c.validate()?;
    }
    let options = file.optimizer.unwrap_or_default();
    options.validate()?;
    Ok(LoadedScenario {
        scenario,
        charging: file.charging,
        options,
    })
}

/// Serializes a scenario as a scenario document.
pub fn emit_scenario(
    scenario: &Scenario,
    charging: Option<&ChargingSession>,
    options: Option<&OptimizerOptions>,
) -> String {
    let raw = scenario.to_raw();
    let file = ScenarioFile {
        schema_version: SCHEMA_VERSION,
        components: raw.components,
        stress_matrix: raw.stress_matrix,
        pf_target: raw.pf_target,
        loss_target: raw.loss_target,
        charging: charging.copied(),
        optimizer: options.cloned(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("scenario documents always serialize");
    s.push('\n');
    s
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory csv writer");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

/// Failure matrix as a table with one row per stress level.
pub fn emit_failure_table(
    scenario: &Scenario,
    matrix: &FailureMatrix,
    format: TableFormat,
) -> String {
    match format {
        TableFormat::Csv => failure_table_csv(scenario, matrix),
        TableFormat::Json => failure_table_json(scenario, matrix),
    }
}

fn failure_table_csv(scenario: &Scenario, matrix: &FailureMatrix) -> String {
    let mut w = csv_writer();
    let mut header = vec!["stress_level".to_string()];
    header.extend(scenario.components().iter().map(|c| c.name.clone()));
    w.write_record(&header).expect("in-memory write");
    for j in 0..matrix.levels() {
        let mut record = vec![j.to_string()];
        record.extend(matrix.column(j).map(fixed));
        w.write_record(&record).expect("in-memory write");
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureTableDocument {
    pub components: Vec<String>,
    /// `entries[i][j]` is the failure probability of component `i` at level `j`.
    pub entries: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<MultiplierPair>,
}

fn failure_table_json(scenario: &Scenario, matrix: &FailureMatrix) -> String {
    let doc = FailureTableDocument {
        components: scenario
            .components()
            .iter()
            .map(|c| c.name.clone())
            .collect(),
        entries: matrix.to_rows(),
        multipliers: matrix.provenance(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("finite table serializes");
    s.push('\n');
    s
}

pub fn parse_failure_table_json(text: &str) -> Result<(Vec<String>, FailureMatrix)> {
    let doc: FailureTableDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: "failure_table".into(),
        location: format!(" (line {}, column {})", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let matrix = FailureMatrix::from_rows(&doc.entries)?;
    let matrix = match doc.multipliers {
        Some(m) => FailureMatrix::from_parts(
            matrix.components(),
            matrix.levels(),
            matrix.entries().to_vec(),
            Some(m),
        ),
        None => matrix,
    };
    Ok((doc.components, matrix))
}

pub fn emit_reliability_curve(curve: &ReliabilityCurve) -> String {
    let mut w = csv_writer();
    w.write_record(["stress_level", "R_j"])
        .expect("in-memory write");
    for (j, r) in curve.per_level.iter().enumerate() {
        w.write_record([j.to_string(), fixed(*r)])
            .expect("in-memory write");
    }
    finish(w)
}

pub fn emit_component_failure(
    curve: &ReliabilityCurve,
    weakest: &WeakestComponentReport,
) -> String {
    let mut w = csv_writer();
    w.write_record(["component", "failure_probability", "sum_pF", "is_weakest"])
        .expect("in-memory write");
    for (i, (c, f)) in weakest
        .components
        .iter()
        .zip(&curve.per_component_failure)
        .enumerate()
    {
        w.write_record([
            c.name.clone(),
            fixed(*f),
            fixed(c.sum_pf),
            (i == weakest.index).to_string(),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

/// Long-format `(component, stress_level, p_ij, p^F_ij)` rows for plotting
/// failure probability against stress probability.
pub fn emit_stress_vs_failure(scenario: &Scenario, matrix: &FailureMatrix) -> String {
    let mut w = csv_writer();
    w.write_record(["component", "stress_level", "p_ij", "pF_ij"])
        .expect("in-memory write");
    for (i, c) in scenario.components().iter().enumerate() {
        for j in 0..matrix.levels() {
            w.write_record([
                c.name.clone(),
                j.to_string(),
                fixed(scenario.stress().get(i, j)),
                fixed(matrix.get(i, j)),
            ])
            .expect("in-memory write");
        }
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultipliersDocument {
    pub lambda1: f64,
    pub lambda2: f64,
    pub objective: f64,
    pub residuals: Residuals,
    /// Absent when the multipliers were supplied rather than estimated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_reason: Option<ConvergenceReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub validity: ValidityReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    pub f1: f64,
    pub f2: f64,
    pub pf_residual: f64,
    pub loss_residual: f64,
    pub penalty_total: f64,
}

pub fn emit_multipliers(doc: &MultipliersDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("finite values serialize");
    s.push('\n');
    s
}
