//! Run configuration. Frequencies are given in Hz and converted to rad/s on
//! resolution; densities and lengths are SI except the dimensionless n̄
//! used by density sweeps (units of 10¹² cm⁻³).

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rephase::ramsey::{PulseModel, RamseyConfig};
use rephase::rates::{classify_regime, rates_from_atomic, DensityScaling, RegimeReport};
use rephase::units::{hz, DENSITY_UNIT};
use rephase::{AtomicParams, EnergyGrid, GridScheme, KernelSpec, RateSet, TrapParams};

/// Marks errors in the user's configuration or input (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rates: RateSource,
    #[serde(default = "one")]
    pub exchange_renorm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap_hz: Option<TrapHz>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub sequence: SequenceConfig,
    #[serde(default)]
    pub times: TimesConfig,
    /// Density sweep in units of 10¹² cm⁻³.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub densities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_class: Option<TwoClassConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterfactuals: Option<CounterfactualConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}

/// Where the rates come from; exactly one source per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSource {
    /// ω_ex and γc from the atomic parameters; Δ₀ given directly.
    Atomic {
        atomic: AtomicParams,
        delta0_hz: f64,
    },
    Override {
        delta0_hz: f64,
        omega_ex_hz: f64,
        gamma_c: f64,
        #[serde(default)]
        detuning_hz: f64,
    },
    /// ω_ex and γc linear in n̄ at fixed Δ₀.
    Scaling {
        delta0_hz: f64,
        exchange_per_nbar_hz: f64,
        gamma_per_nbar: f64,
        #[serde(default = "one")]
        nbar: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapHz {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub scheme: GridScheme,
    pub n_points: usize,
    #[serde(default = "default_e_max")]
    pub e_max: f64,
}

fn default_e_max() -> f64 {
    rephase::grid::DEFAULT_E_MAX
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            scheme: GridScheme::GaussLegendreTruncated,
            n_points: rephase::grid::DEFAULT_POINTS,
            e_max: default_e_max(),
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> rephase::Result<EnergyGrid> {
        match self.scheme {
            GridScheme::GaussLaguerreAlpha2 => EnergyGrid::gauss_laguerre(self.n_points),
            GridScheme::GaussLegendreTruncated => {
                EnergyGrid::gauss_legendre(self.n_points, self.e_max)
            }
            GridScheme::UniformTruncated => EnergyGrid::uniform(self.n_points, self.e_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub ramsey_time_tr: f64,
    pub detuning_dr_hz: f64,
    #[serde(default)]
    pub pulse_model: PulseModel,
    pub n_detuning_steps: usize,
    pub max_step: f64,
    pub fringe_periods: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        let r = RamseyConfig::new(0.1);
        SequenceConfig {
            ramsey_time_tr: r.ramsey_time_tr,
            detuning_dr_hz: 3.6,
            pulse_model: r.pulse_model,
            n_detuning_steps: r.n_detuning_steps,
            max_step: r.max_step,
            fringe_periods: r.fringe_periods,
        }
    }
}

impl SequenceConfig {
    pub fn ramsey(&self) -> RamseyConfig {
        RamseyConfig {
            ramsey_time_tr: self.ramsey_time_tr,
            detuning_dr: hz(self.detuning_dr_hz),
            pulse_model: self.pulse_model,
            n_detuning_steps: self.n_detuning_steps,
            max_step: self.max_step,
            fringe_periods: self.fringe_periods,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesConfig {
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "one_usize")]
    pub sample_every: usize,
    /// Ramsey times, s. Either an explicit list or `tr_range`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tr_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tr_range: Option<TrRange>,
}

fn one_usize() -> usize {
    1
}

impl Default for TimesConfig {
    fn default() -> Self {
        TimesConfig {
            t_final: 0.5,
            dt: 1e-3,
            sample_every: 1,
            tr_list: None,
            tr_range: None,
        }
    }
}

/// Evenly spaced Ramsey times `start, start + step, ...` up to `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl TimesConfig {
    pub fn ramsey_times(&self) -> Result<Vec<f64>> {
        match (&self.tr_list, &self.tr_range) {
            (Some(_), Some(_)) => Err(config_error(
                "times: give either tr_list or tr_range, not both",
            )),
            (Some(list), None) => Ok(list.clone()),
            (None, Some(r)) => {
                if !(r.step > 0.0 && r.start > 0.0 && r.stop >= r.start) {
                    return Err(config_error(
                        "times.tr_range: need 0 < start <= stop and step > 0",
                    ));
                }
                let n = ((r.stop - r.start) / r.step + 1e-9).floor() as usize;
                Ok((0..=n).map(|k| r.start + r.step * k as f64).collect())
            }
            (None, None) => Err(config_error("times: tr_list or tr_range is required")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoClassConfig {
    pub delta_split_hz: f64,
    pub omega_ex_hz: f64,
    #[serde(default)]
    pub gamma_x: f64,
}

/// Exchange-off and collision-off runs at one density, evolved directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualConfig {
    pub nbar: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: PathBuf,
    #[serde(default = "csv_format")]
    pub format: String,
}

fn csv_format() -> String {
    "csv".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            path: PathBuf::from("out"),
            format: csv_format(),
        }
    }
}

/// Rates resolved for one run, with the trap-dependent regime report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub rates: RateSet,
    pub nbar: Option<f64>,
    pub regime: Option<RegimeReport>,
}

impl RunConfig {
    /// Reads a config file; a run manifest is accepted too, in which case
    /// its embedded config is used.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let value = match value.get("config") {
            Some(inner) if value.get("tool").is_some() => inner.clone(),
            _ => value,
        };
        let cfg: RunConfig = serde_json::from_value(value)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exchange_renorm > 0.0 && self.exchange_renorm <= 1.0) {
            bail!(config_error("exchange_renorm: must lie in (0, 1]"));
        }
        let finite = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(config_error(format!("{name}: must be finite")))
            }
        };
        match &self.rates {
            RateSource::Atomic { atomic, delta0_hz } => {
                finite("rates.delta0_hz", *delta0_hz)?;
                atomic
                    .validate()
                    .map_err(|e| config_error(format!("rates.atomic: {e}")))?;
            }
            RateSource::Override {
                delta0_hz,
                omega_ex_hz,
                gamma_c,
                detuning_hz,
            } => {
                finite("rates.delta0_hz", *delta0_hz)?;
                finite("rates.omega_ex_hz", *omega_ex_hz)?;
                finite("rates.detuning_hz", *detuning_hz)?;
                if !(gamma_c.is_finite() && *gamma_c >= 0.0) {
                    bail!(config_error("rates.gamma_c: must be finite and >= 0"));
                }
            }
            RateSource::Scaling {
                delta0_hz,
                exchange_per_nbar_hz,
                gamma_per_nbar,
                nbar,
            } => {
                finite("rates.delta0_hz", *delta0_hz)?;
                finite("rates.exchange_per_nbar_hz", *exchange_per_nbar_hz)?;
                if !(gamma_per_nbar.is_finite() && *gamma_per_nbar >= 0.0) {
                    bail!(config_error(
                        "rates.gamma_per_nbar: must be finite and >= 0"
                    ));
                }
                if !(nbar.is_finite() && *nbar >= 0.0) {
                    bail!(config_error("rates.nbar: must be finite and >= 0"));
                }
            }
        }
        if let Some(t) = &self.trap_hz {
            TrapParams::from_hz(t.x, t.y, t.z)
                .map_err(|e| config_error(format!("trap_hz: {e}")))?;
        }
        self.grid
            .build()
            .map_err(|e| config_error(format!("grid: {e}")))?;
        if !(self.times.t_final.is_finite() && self.times.t_final > 0.0) {
            bail!(config_error("times.t_final: must be finite and > 0"));
        }
        if !(self.times.dt.is_finite() && self.times.dt > 0.0) {
            bail!(config_error("times.dt: must be finite and > 0"));
        }
        if self.times.sample_every == 0 {
            bail!(config_error("times.sample_every: must be >= 1"));
        }
        self.sequence
            .ramsey()
            .validate()
            .map_err(|e| config_error(format!("sequence: {e}")))?;
        if let Some(d) = &self.densities {
            if d.is_empty() {
                bail!(config_error("densities: must be nonempty"));
            }
            if d.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
                bail!(config_error("densities: entries must be finite and >= 0"));
            }
        }
        if self.output.format != "csv" {
            bail!(config_error(format!(
                "output.format: unsupported `{}` (only csv)",
                self.output.format
            )));
        }
        Ok(())
    }

    pub fn trap(&self) -> Option<TrapParams> {
        self.trap_hz
            .map(|t| TrapParams::from_hz(t.x, t.y, t.z).expect("validated"))
    }

    /// Rates at the configured density, or at `nbar` for density sweeps.
    pub fn resolve(&self, nbar: Option<f64>) -> Result<Resolved> {
        let renorm = self.exchange_renorm;
        let (rates, used_nbar) = match &self.rates {
            RateSource::Atomic { atomic, delta0_hz } => {
                let p = match nbar {
                    Some(n) => atomic.with_density(n * DENSITY_UNIT),
                    None => *atomic,
                };
                let r = rates_from_atomic(&p, hz(*delta0_hz), renorm)
                    .map_err(|e| config_error(format!("rates: {e}")))?;
                (r, Some(p.density_nbar / DENSITY_UNIT))
            }
            RateSource::Override {
                delta0_hz,
                omega_ex_hz,
                gamma_c,
                detuning_hz,
            } => {
                if nbar.is_some() {
                    bail!(config_error(
                        "densities: a density sweep needs rates.source `atomic` or `scaling`"
                    ));
                }
                let r = RateSet::new(hz(*delta0_hz), hz(*omega_ex_hz), *gamma_c)
                    .map_err(|e| config_error(format!("rates: {e}")))?
                    .with_detuning(hz(*detuning_hz))
                    .with_renorm(renorm);
                (r, None)
            }
            RateSource::Scaling {
                delta0_hz,
                exchange_per_nbar_hz,
                gamma_per_nbar,
                nbar: base,
            } => {
                let n = nbar.unwrap_or(*base);
                let s = DensityScaling {
                    delta0: hz(*delta0_hz),
                    exchange_per_nbar: hz(*exchange_per_nbar_hz),
                    gamma_per_nbar: *gamma_per_nbar,
                    exchange_renorm: renorm,
                };
                let r = s
                    .rates(n)
                    .map_err(|e| config_error(format!("rates: {e}")))?;
                (r, Some(n))
            }
        };
        rates
            .validate()
            .map_err(|e| config_error(format!("rates: {e}")))?;
        let regime = self.trap().map(|t| classify_regime(&rates, &t));
        Ok(Resolved {
            rates,
            nbar: used_nbar,
            regime,
        })
    }

    pub fn densities(&self) -> Result<Vec<f64>> {
        self.densities
            .clone()
            .ok_or_else(|| config_error("densities: required for this command"))
    }
}
