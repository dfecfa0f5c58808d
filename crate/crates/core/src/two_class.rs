//! Two-class toy model: a fast and a slow macroscopic spin, precessing at
//! ±δ/2 about u∥, both rotating about their sum through the exchange field.
//!
//! dS_f/dt = (+δ/2) u∥ × S_f + ω_ex S̄₂ × S_f − γx (S_f − S̄₂)
//! dS_s/dt = (−δ/2) u∥ × S_s + ω_ex S̄₂ × S_s − γx (S_s − S̄₂)
//!
//! with S̄₂ = (S_f + S_s)/2. This is the kinetic equation on a two-node grid
//! of equal weights, so the difference S_f − S_s rotates about the sum at
//! ω_ex|S̄₂| and a phase difference is reversed after π/ω_ex.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::curve::ContrastCurve;
use crate::error::{Error, Result};
use crate::kinetic::RK4_STABILITY_LIMIT;
use crate::rates::RateSet;
use crate::spin::SpinVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoClassState {
    pub s_fast: SpinVector,
    pub s_slow: SpinVector,
    /// Precession-rate difference δ between the classes, rad/s.
    pub delta_split: f64,
    /// rad/s
    pub omega_ex: f64,
    /// Class-exchange rate standing in for lateral collisions, 1/s.
    #[serde(default)]
    pub gamma_x: f64,
}

impl TwoClassState {
    /// Both classes start along u⊥1.
    pub fn coherent(delta_split: f64, omega_ex: f64, gamma_x: f64) -> Self {
        TwoClassState {
            s_fast: SpinVector::U_PERP1,
            s_slow: SpinVector::U_PERP1,
            delta_split,
            omega_ex,
            gamma_x,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("s_fast", self.s_fast), ("s_slow", self.s_slow)] {
            if !s.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
            if s.norm() > 1.0 + 1e-9 {
                return Err(Error::invalid(name, "norm must be <= 1"));
            }
        }
        if !self.delta_split.is_finite() {
            return Err(Error::invalid("delta_split", "must be finite"));
        }
        if !self.omega_ex.is_finite() {
            return Err(Error::invalid("omega_ex", "must be finite"));
        }
        if !(self.gamma_x.is_finite() && self.gamma_x >= 0.0) {
            return Err(Error::invalid("gamma_x", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn mean(&self) -> SpinVector {
        0.5 * (self.s_fast + self.s_slow)
    }

    fn max_rate(&self) -> f64 {
        0.5 * self.delta_split.abs() + self.omega_ex.abs() + self.gamma_x
    }

    fn derivative(&self, f: SpinVector, s: SpinVector) -> (SpinVector, SpinVector) {
        let mean = 0.5 * (f + s);
        let half = 0.5 * self.delta_split;
        let ex = mean * self.omega_ex;
        let df = (SpinVector::new(0.0, 0.0, half) + ex).cross(f) - self.gamma_x * (f - mean);
        let ds = (SpinVector::new(0.0, 0.0, -half) + ex).cross(s) - self.gamma_x * (s - mean);
        (df, ds)
    }
}

/// Integrates the two-class model with fixed-step RK4, sampling every step.
/// Contrast is |S̄₂⊥|.
pub fn evolve_two_class(init: &TwoClassState, t_final: f64, dt: f64) -> Result<ContrastCurve> {
    Ok(integrate(init, t_final, dt)?.0)
}

/// As [`evolve_two_class`], also returning the final state.
pub fn integrate(
    init: &TwoClassState,
    t_final: f64,
    dt: f64,
) -> Result<(ContrastCurve, TwoClassState)> {
    init.validate()?;
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::invalid("t_final", "must be finite and > 0"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", "must be finite and > 0"));
    }
    let steps = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let rate = init.max_rate();
    if rate > 0.0 && h * rate > RK4_STABILITY_LIMIT {
        return Err(Error::UnstableStep {
            dt: h,
            limit: RK4_STABILITY_LIMIT / rate,
        });
    }

    let mut st = *init;
    let mut curve = ContrastCurve::with_capacity(steps + 1);
    curve.push(0.0, st.mean())?;
    for step in 1..=steps {
        let (f, s) = (st.s_fast, st.s_slow);
        let (a1, b1) = st.derivative(f, s);
        let (a2, b2) = st.derivative(f + 0.5 * h * a1, s + 0.5 * h * b1);
        let (a3, b3) = st.derivative(f + 0.5 * h * a2, s + 0.5 * h * b2);
        let (a4, b4) = st.derivative(f + h * a3, s + h * b3);
        st.s_fast.axpy(h / 6.0, a1 + 2.0 * a2 + 2.0 * a3 + a4);
        st.s_slow.axpy(h / 6.0, b1 + 2.0 * b2 + 2.0 * b3 + b4);
        let t = step as f64 * h;
        if !(st.s_fast.is_finite() && st.s_slow.is_finite()) {
            return Err(Error::NonFinite { time: t, node: 0 });
        }
        curve.push(t, st.mean())?;
    }
    Ok((curve, st))
}

fn positive_exchange(rates: &RateSet) -> Result<f64> {
    let w = rates.effective_exchange();
    if !(w > 0.0) {
        return Err(Error::invalid("omega_ex", "must be > 0"));
    }
    Ok(w)
}

/// Full exchange period 2π/ω_ex, the estimate compared with the first
/// revival time.
pub fn two_class_revival_estimate(rates: &RateSet) -> Result<f64> {
    Ok(2.0 * PI / positive_exchange(rates)?)
}

/// Half period π/ω_ex: time for the exchange to swap the two classes.
pub fn two_class_rephasing_time(rates: &RateSet) -> Result<f64> {
    Ok(PI / positive_exchange(rates)?)
}
