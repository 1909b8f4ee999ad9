//! JSON report written by every subcommand.

use serde::{Deserialize, Serialize};
use weakmeter_core::algebra::AlgebraReport;
use weakmeter_core::ensemble::EnsembleReport;
use weakmeter_core::experiment::{CouplingMode, ExperimentSpec};
use weakmeter_core::weak::{ShiftReport, WeakValue};
use weakmeter_core::{FockConfig, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ExperimentSpec>,
    pub fock: FockConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<CouplingMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak_value: Option<WeakValueReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shifts: Vec<ShiftReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_scan: Option<ResidualScanReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<BranchReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<Vec<AlgebraReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<Vec<EnsembleReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub husimi: Option<HusimiReport>,
    /// Always the last field, so reports can be compared line by line without it.
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(command: &str, fock: FockConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            spec: None,
            fock,
            mode: None,
            weak_value: None,
            shifts: Vec::new(),
            residual_scan: None,
            branches: None,
            algebra: None,
            ensemble: None,
            husimi: None,
            wall_time_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakValueReport {
    pub value: C64,
    pub overlap: C64,
    pub near_orthogonal: bool,
}

impl From<WeakValue> for WeakValueReport {
    fn from(w: WeakValue) -> Self {
        Self {
            value: w.value,
            overlap: w.overlap,
            near_orthogonal: w.near_orthogonal(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualScanReport {
    /// Log-log slope of the residual; absent when the fit is not possible.
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Unselected outcome of a strong translation measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub eigenvalue: f64,
    pub probability: f64,
    pub mean_q: f64,
    pub mean_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiReport {
    pub stage: String,
    pub resolution: usize,
    pub q_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub normalization: f64,
    pub centroid: [f64; 2],
    /// `[q, p, density]` of the largest cell.
    pub peak: [f64; 3],
}
