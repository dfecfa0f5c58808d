//! Idealized Ramsey sequence on top of the kinetic solver: π/2 pulse, free
//! evolution for T_R at detuning δ_R, π/2 pulse, read out P = (1 + S̄∥)/2.
//!
//! Conventions: |0⟩ = −u∥, |1⟩ = +u∥, pulses are instantaneous rotations
//! about a transverse axis, and a π/2 pulse about u⊥2 takes −u∥ to u⊥1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::curve::ContrastCurve;
use crate::error::{Error, Result};
use crate::fit::fit_fringe;
use crate::grid::EnergyGrid;
use crate::kernel::KernelSpec;
use crate::kinetic::KineticModel;
use crate::rates::RateSet;
use crate::spin::{SpinField, SpinVector};
use crate::units::hz;

/// The step never exceeds this fraction of a detuning precession radian.
const DETUNING_STEP_FACTOR: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseAxis {
    Perp1,
    Perp2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseModel {
    #[default]
    Instantaneous,
}

/// Rotates one spin by `angle` about a transverse axis.
pub fn rotate(s: SpinVector, angle: f64, axis: PulseAxis) -> SpinVector {
    let (sin, cos) = angle.sin_cos();
    match axis {
        PulseAxis::Perp2 => SpinVector::new(
            s.perp1 * cos - s.par * sin,
            s.perp2,
            s.perp1 * sin + s.par * cos,
        ),
        PulseAxis::Perp1 => SpinVector::new(
            s.perp1,
            s.perp2 * cos + s.par * sin,
            -s.perp2 * sin + s.par * cos,
        ),
    }
}

pub fn apply_pulse(field: &SpinField, angle: f64, axis: PulseAxis) -> SpinField {
    SpinField {
        spins: field
            .spins
            .iter()
            .map(|&s| rotate(s, angle, axis))
            .collect(),
        time: field.time,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyConfig {
    /// s
    pub ramsey_time_tr: f64,
    /// Centre of the detuning scan, rad/s.
    #[serde(default = "default_detuning")]
    pub detuning_dr: f64,
    #[serde(default)]
    pub pulse_model: PulseModel,
    #[serde(default = "default_steps")]
    pub n_detuning_steps: usize,
    /// Upper bound on the integration step, s.
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    /// Width of the detuning scan in fringe periods 2π/T_R.
    #[serde(default = "default_periods")]
    pub fringe_periods: f64,
}

fn default_detuning() -> f64 {
    hz(3.6)
}
fn default_steps() -> usize {
    30
}
fn default_max_step() -> f64 {
    1e-3
}
fn default_periods() -> f64 {
    2.0
}

impl RamseyConfig {
    pub fn new(ramsey_time_tr: f64) -> Self {
        RamseyConfig {
            ramsey_time_tr,
            detuning_dr: default_detuning(),
            pulse_model: PulseModel::Instantaneous,
            n_detuning_steps: default_steps(),
            max_step: default_max_step(),
            fringe_periods: default_periods(),
        }
    }

    pub fn with_time(mut self, tr: f64) -> Self {
        self.ramsey_time_tr = tr;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ramsey_time_tr.is_finite() && self.ramsey_time_tr > 0.0) {
            return Err(Error::invalid("ramsey_time_tr", "must be finite and > 0"));
        }
        if !self.detuning_dr.is_finite() {
            return Err(Error::invalid("detuning_dr", "must be finite"));
        }
        if self.n_detuning_steps < 5 {
            return Err(Error::invalid("n_detuning_steps", "must be >= 5"));
        }
        if !(self.max_step.is_finite() && self.max_step > 0.0) {
            return Err(Error::invalid("max_step", "must be finite and > 0"));
        }
        if !(self.fringe_periods.is_finite() && self.fringe_periods >= 1.5) {
            return Err(Error::invalid("fringe_periods", "must be >= 1.5"));
        }
        Ok(())
    }

    /// Detunings spaced evenly over `fringe_periods` periods centred on
    /// `detuning_dr`.
    pub fn detunings(&self) -> Vec<f64> {
        let n = self.n_detuning_steps;
        let width = self.fringe_periods * 2.0 * PI / self.ramsey_time_tr;
        (0..n)
            .map(|k| self.detuning_dr + width * (k as f64 / (n - 1) as f64 - 0.5))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub ramsey_time_tr: f64,
    pub detunings: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub fitted_contrast: f64,
    pub fitted_phase: f64,
    pub residual_rms: f64,
}

/// Transition probability of one Ramsey sequence, with δ_R taken from
/// `rates.detuning`.
pub fn ramsey_sequence(
    grid: &EnergyGrid,
    rates: &RateSet,
    kernel: &KernelSpec,
    cfg: &RamseyConfig,
) -> Result<f64> {
    cfg.validate()?;
    let model = KineticModel::new(grid, rates, kernel)?;
    let start = apply_pulse(&SpinField::ground(grid.len()), FRAC_PI_2, PulseAxis::Perp2);
    let tr = cfg.ramsey_time_tr;
    let mut dt = cfg.max_step.min(model.stability_limit());
    if rates.detuning != 0.0 {
        dt = dt.min(DETUNING_STEP_FACTOR / rates.detuning.abs());
    }
    let traj = model.evolve(&start, tr, dt, usize::MAX)?;
    let end = apply_pulse(&traj.final_state, FRAC_PI_2, PulseAxis::Perp2);
    let par = grid.average(&end)?.par;
    Ok((0.5 * (1.0 + par)).clamp(0.0, 1.0))
}

/// Ramsey sequences over the configured detuning scan, then a linear fringe
/// fit at the known frequency T_R. The base detuning in `rates` is replaced.
pub fn fringe_scan(
    grid: &EnergyGrid,
    rates: &RateSet,
    kernel: &KernelSpec,
    cfg: &RamseyConfig,
) -> Result<FringeScan> {
    cfg.validate()?;
    let detunings = cfg.detunings();
    let probabilities = detunings
        .par_iter()
        .map(|&d| ramsey_sequence(grid, &rates.with_detuning(d), kernel, cfg))
        .collect::<Result<Vec<f64>>>()?;
    let fit = fit_fringe(&detunings, &probabilities, cfg.ramsey_time_tr)?;
    Ok(FringeScan {
        ramsey_time_tr: cfg.ramsey_time_tr,
        detunings,
        probabilities,
        fitted_contrast: fit.contrast,
        fitted_phase: fit.phase,
        residual_rms: fit.residual_rms,
    })
}

/// Fringe contrast at each Ramsey time, normalized to the first one.
pub fn contrast_vs_time(
    grid: &EnergyGrid,
    rates: &RateSet,
    kernel: &KernelSpec,
    tr_list: &[f64],
    cfg: &RamseyConfig,
) -> Result<ContrastCurve> {
    Ok(contrast_scans(grid, rates, kernel, tr_list, cfg)?.0)
}

/// As [`contrast_vs_time`], also returning the individual scans.
pub fn contrast_scans(
    grid: &EnergyGrid,
    rates: &RateSet,
    kernel: &KernelSpec,
    tr_list: &[f64],
    cfg: &RamseyConfig,
) -> Result<(ContrastCurve, Vec<FringeScan>)> {
    if tr_list.is_empty() {
        return Err(Error::invalid("tr_list", "must be nonempty"));
    }
    if tr_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("tr_list", "must be strictly increasing"));
    }
    let scans = tr_list
        .par_iter()
        .map(|&tr| fringe_scan(grid, rates, kernel, &cfg.with_time(tr)))
        .collect::<Result<Vec<_>>>()?;
    let c0 = scans[0].fitted_contrast;
    if !(c0 > 0.0) {
        return Err(Error::DegenerateFit(
            "zero contrast at the first Ramsey time".into(),
        ));
    }
    let contrast: Vec<f64> = scans.iter().map(|s| s.fitted_contrast / c0).collect();
    Ok((ContrastCurve::from_contrast(tr_list, &contrast)?, scans))
}
