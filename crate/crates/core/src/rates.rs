//! Conversion of atomic and trap parameters into the dynamical rates of the
//! kinetic model, and classification of the resulting regime.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units::{hz, BOLTZMANN, DENSITY_UNIT, HBAR};

/// Atomic-sample parameters, all SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomicParams {
    /// kg
    pub mass: f64,
    /// Inter-state s-wave scattering length, m.
    pub scattering_length_a01: f64,
    /// Mean density n̄, m⁻³.
    pub density_nbar: f64,
    /// K
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering_length_a00: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering_length_a11: Option<f64>,
}

impl AtomicParams {
    pub fn new(mass: f64, a01: f64, density_nbar: f64, temperature: f64) -> Result<Self> {
        let p = AtomicParams {
            mass,
            scattering_length_a01: a01,
            density_nbar,
            temperature,
            scattering_length_a00: None,
            scattering_length_a11: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::invalid("mass", "must be finite and > 0"));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::invalid("temperature", "must be finite and > 0"));
        }
        if !(self.density_nbar.is_finite() && self.density_nbar >= 0.0) {
            return Err(Error::invalid("density_nbar", "must be finite and >= 0"));
        }
        if !(self.scattering_length_a01.is_finite() && self.scattering_length_a01 != 0.0) {
            return Err(Error::invalid(
                "scattering_length_a01",
                "must be finite and nonzero",
            ));
        }
        Ok(())
    }

    /// Same sample at another mean density (m⁻³).
    pub fn with_density(mut self, density_nbar: f64) -> Self {
        self.density_nbar = density_nbar;
        self
    }
}

/// Trap angular frequencies, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
}

impl TrapParams {
    pub fn from_hz(fx: f64, fy: f64, fz: f64) -> Result<Self> {
        let t = TrapParams {
            omega_x: hz(fx),
            omega_y: hz(fy),
            omega_z: hz(fz),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("omega_x", self.omega_x),
            ("omega_y", self.omega_y),
            ("omega_z", self.omega_z),
        ] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(
                    name,
                    "trap frequency must be finite and > 0",
                ));
            }
        }
        Ok(())
    }

    pub fn min_omega(&self) -> f64 {
        self.omega_x.min(self.omega_y).min(self.omega_z)
    }
}

/// The dynamical rates of the kinetic equation, all angular (rad/s) except
/// `gamma_c` (1/s) and the dimensionless `exchange_renorm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub delta0: f64,
    pub omega_ex: f64,
    pub gamma_c: f64,
    #[serde(default)]
    pub detuning: f64,
    #[serde(default = "default_renorm")]
    pub exchange_renorm: f64,
}

fn default_renorm() -> f64 {
    1.0
}

impl RateSet {
    pub fn new(delta0: f64, omega_ex: f64, gamma_c: f64) -> Result<Self> {
        let r = RateSet {
            delta0,
            omega_ex,
            gamma_c,
            detuning: 0.0,
            exchange_renorm: 1.0,
        };
        r.validate()?;
        Ok(r)
    }

    /// All rates zero: pure free evolution with no inhomogeneity.
    pub fn zero() -> Self {
        RateSet {
            delta0: 0.0,
            omega_ex: 0.0,
            gamma_c: 0.0,
            detuning: 0.0,
            exchange_renorm: 1.0,
        }
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_renorm(mut self, renorm: f64) -> Self {
        self.exchange_renorm = renorm;
        self
    }

    /// ω_ex scaled by the exchange renormalization; the rate the solver uses.
    pub fn effective_exchange(&self) -> f64 {
        self.omega_ex * self.exchange_renorm
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta0.is_finite() {
            return Err(Error::invalid("delta0", "must be finite"));
        }
        if !self.omega_ex.is_finite() {
            return Err(Error::invalid("omega_ex", "must be finite"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        if !(self.gamma_c.is_finite() && self.gamma_c >= 0.0) {
            return Err(Error::invalid("gamma_c", "must be finite and >= 0"));
        }
        if !(self.exchange_renorm > 0.0 && self.exchange_renorm <= 1.0) {
            return Err(Error::invalid("exchange_renorm", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Inhomogeneity as a function of dimensionless density:
/// Δ₀(n̄) = base + slope·n̄, both angular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InhomogeneityModel {
    pub base: f64,
    pub slope: f64,
}

impl Default for InhomogeneityModel {
    fn default() -> Self {
        InhomogeneityModel {
            base: hz(1.2),
            slope: hz(0.1),
        }
    }
}

impl InhomogeneityModel {
    /// `nbar` in units of 10¹² cm⁻³.
    pub fn delta0(&self, nbar: f64) -> f64 {
        self.base + self.slope * nbar
    }
}

/// v_T = √(k_B T / m).
pub fn thermal_velocity(p: &AtomicParams) -> f64 {
    (BOLTZMANN * p.temperature / p.mass).sqrt()
}

/// Identical-spin-rotation (exchange) rate ω_ex = 2π · 2ħ|a01|n̄/m, rad/s.
pub fn exchange_rate(p: &AtomicParams) -> f64 {
    2.0 * PI * 2.0 * HBAR * p.scattering_length_a01.abs() * p.density_nbar / p.mass
}

/// Lateral elastic collision rate γc = (32√π/3) a01² n̄ v_T, 1/s.
pub fn lateral_collision_rate(p: &AtomicParams) -> f64 {
    32.0 * PI.sqrt() / 3.0 * p.scattering_length_a01.powi(2) * p.density_nbar * thermal_velocity(p)
}

/// Mean-field shift of the clock transition for an equal superposition,
/// −0.4 Hz per 10¹² cm⁻³, returned in rad/s.
pub fn mean_field_shift(density_local: f64) -> Result<f64> {
    if !(density_local.is_finite() && density_local >= 0.0) {
        return Err(Error::invalid("density_local", "must be finite and >= 0"));
    }
    Ok(hz(-0.4) * density_local / DENSITY_UNIT)
}

/// Rates derived from atomic parameters, with Δ₀ supplied by the caller.
pub fn rates_from_atomic(p: &AtomicParams, delta0: f64, exchange_renorm: f64) -> Result<RateSet> {
    p.validate()?;
    let r = RateSet {
        delta0,
        omega_ex: exchange_rate(p),
        gamma_c: lateral_collision_rate(p),
        detuning: 0.0,
        exchange_renorm,
    };
    r.validate()?;
    Ok(r)
}

/// Rates that scale linearly with the dimensionless density n̄ (units of
/// 10¹² cm⁻³) at fixed Δ₀: ω_ex = exchange_per_nbar·n̄, γc = gamma_per_nbar·n̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityScaling {
    /// rad/s
    pub delta0: f64,
    /// Bare exchange rate per unit n̄, rad/s; `exchange_renorm` applies on top.
    pub exchange_per_nbar: f64,
    /// 1/s per unit n̄
    pub gamma_per_nbar: f64,
    #[serde(default = "default_renorm")]
    pub exchange_renorm: f64,
}

impl DensityScaling {
    /// Δ₀/2π = 2 Hz, effective ω_ex/2π = 4.5 Hz·n̄ (bare 7.5 Hz·n̄ times the
    /// 0.6 renormalization), γc = 2.1 s⁻¹·n̄.
    pub fn trapped_clock() -> Self {
        DensityScaling {
            delta0: hz(2.0),
            exchange_per_nbar: hz(7.5),
            gamma_per_nbar: 2.1,
            exchange_renorm: 0.6,
        }
    }

    pub fn rates(&self, nbar: f64) -> Result<RateSet> {
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(Error::invalid("nbar", "must be finite and >= 0"));
        }
        let r = RateSet {
            delta0: self.delta0,
            omega_ex: self.exchange_per_nbar * nbar,
            gamma_c: self.gamma_per_nbar * nbar,
            detuning: 0.0,
            exchange_renorm: self.exchange_renorm,
        };
        r.validate()?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    TightSync,
    LossAndRevival,
    Dephasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// ω_ex/Δ₀ above which synchronization counts as tight.
    pub tight_ratio: f64,
    /// Knudsen test: γc < knudsen_fraction · min trap frequency.
    pub knudsen_fraction: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            tight_ratio: 10.0,
            knudsen_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub knudsen_ok: bool,
    pub isre_dominates_collisions: bool,
    pub isre_dominates_inhomogeneity: bool,
    pub regime_label: Regime,
}

pub fn classify_regime(r: &RateSet, t: &TrapParams) -> RegimeReport {
    classify_regime_with(r, t, &RegimeThresholds::default())
}

/// Self-rephasing needs the exchange to revert spins before collisions
/// reshuffle classes (ω_ex/π > γc) and before the dephasing reaches π
/// (ω_ex > Δ₀). The effective (renormalized) exchange rate is used.
pub fn classify_regime_with(
    r: &RateSet,
    t: &TrapParams,
    thresholds: &RegimeThresholds,
) -> RegimeReport {
    let omega_ex = r.effective_exchange().abs();
    let delta0 = r.delta0.abs();

    let knudsen_ok = r.gamma_c < thresholds.knudsen_fraction * t.min_omega();
    let isre_dominates_collisions = omega_ex / PI > r.gamma_c;
    let isre_dominates_inhomogeneity = omega_ex > delta0;

    let regime_label = if isre_dominates_collisions && isre_dominates_inhomogeneity {
        if omega_ex >= thresholds.tight_ratio * delta0 {
            Regime::TightSync
        } else {
            Regime::LossAndRevival
        }
    } else {
        Regime::Dephasing
    };

    RegimeReport {
        knudsen_ok,
        isre_dominates_collisions,
        isre_dominates_inhomogeneity,
        regime_label,
    }
}
