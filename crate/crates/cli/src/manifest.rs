use std::time::Duration;

use serde::{Deserialize, Serialize};

use rephase::rates::RegimeReport;
use rephase::units::to_hz;
use rephase::{EnergyGrid, GridScheme, RateSet};

use crate::config::{Resolved, RunConfig};

pub const TOOL: &str = "rephase";

/// Everything needed to repeat a run: the effective config (after command
/// line overrides), the rates it resolved to, and the grid fingerprint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub resolved: Vec<ResolvedRates>,
    pub grid: GridInfo,
    pub outputs: Vec<String>,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedRates {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    /// rad/s and 1/s
    pub rad_per_s: RateSet,
    pub hz: RatesHz,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatesHz {
    pub delta0: f64,
    pub omega_ex: f64,
    pub omega_ex_effective: f64,
    pub detuning: f64,
    /// 1/s, unchanged
    pub gamma_c: f64,
}

impl From<&Resolved> for ResolvedRates {
    fn from(r: &Resolved) -> Self {
        let x = &r.rates;
        ResolvedRates {
            nbar: r.nbar,
            rad_per_s: *x,
            hz: RatesHz {
                delta0: to_hz(x.delta0),
                omega_ex: to_hz(x.omega_ex),
                omega_ex_effective: to_hz(x.effective_exchange()),
                detuning: to_hz(x.detuning),
                gamma_c: x.gamma_c,
            },
            regime: r.regime,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridInfo {
    pub scheme: GridScheme,
    pub n_points: usize,
    pub e_max: Option<f64>,
    pub tail_deficit: f64,
    pub sha256: String,
}

impl From<&EnergyGrid> for GridInfo {
    fn from(g: &EnergyGrid) -> Self {
        GridInfo {
            scheme: g.scheme(),
            n_points: g.len(),
            e_max: g.e_max(),
            tail_deficit: g.tail_deficit(),
            sha256: g.checksum(),
        }
    }
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: &RunConfig,
        resolved: &[Resolved],
        grid: &EnergyGrid,
        outputs: Vec<String>,
        duration: Duration,
    ) -> Self {
        RunManifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            resolved: resolved.iter().map(ResolvedRates::from).collect(),
            grid: grid.into(),
            outputs,
            duration_s: duration.as_secs_f64(),
        }
    }
}
