//! Energy-space kinetic equation for the spin density S(E, t):
//!
//! ∂ₜS(E) + γc [S(E) − S̄] = [(Δ₀E + δ_R) u∥ + ω_ex ∫dE′ (E′²/2) e^(−E′) K(E, E′) S(E′)] × S(E)
//!
//! integrated with classical fixed-step RK4. Spins are never renormalized, so
//! norm drift measures integration error directly.
//!
//! The detuning δ_R is a uniform addition to the longitudinal rate (rotating
//! frame). It commutes with every other term, so it rotates S̄ rigidly about
//! u∥ and leaves |S̄⊥| unchanged.

use crate::curve::ContrastCurve;
use crate::error::{Error, Result};
use crate::grid::{weighted_sum, EnergyGrid};
use crate::kernel::{build_kernel_matrix, KernelMatrix, KernelSpec};
use crate::rates::RateSet;
use crate::spin::{SpinField, SpinVector};

/// Largest dt·λ_max accepted by [`KineticModel::evolve`]. Classical RK4 is
/// stable on the imaginary axis up to 2√2 ≈ 2.83.
pub const RK4_STABILITY_LIMIT: f64 = 2.5;

/// dt·λ_max used by [`KineticModel::suggested_step`]; at this value the
/// per-step norm error of the fastest node is below 1e-12.
pub const SUGGESTED_STEP_FACTOR: f64 = 0.01;

#[derive(Debug, Clone)]
enum Coupling {
    /// Mᵢ = S̄ for every node.
    Mean,
    /// Mᵢ = Σⱼ (wⱼ K(Eᵢ, Eⱼ)) Sⱼ with the weights folded in.
    Weighted(KernelMatrix),
}

/// The right-hand side of the kinetic equation on a fixed grid, with all
/// per-node constants precomputed.
#[derive(Debug, Clone)]
pub struct KineticModel {
    weights: Vec<f64>,
    node_rates: Vec<f64>,
    exchange: f64,
    gamma_c: f64,
    coupling: Coupling,
    exchange_bound: f64,
}

impl KineticModel {
    pub fn new(grid: &EnergyGrid, rates: &RateSet, kernel: &KernelSpec) -> Result<Self> {
        rates.validate()?;
        let node_rates = grid
            .nodes()
            .iter()
            .map(|&e| rates.delta0 * e + rates.detuning)
            .collect();
        Self::build(grid, node_rates, rates, kernel)
    }

    /// Model whose longitudinal rate on node i is `offsets[i] + δ_R` instead
    /// of Δ₀Eᵢ + δ_R. `rates.delta0` is ignored.
    pub fn with_node_offsets(
        grid: &EnergyGrid,
        offsets: &[f64],
        rates: &RateSet,
        kernel: &KernelSpec,
    ) -> Result<Self> {
        rates.validate()?;
        if offsets.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: offsets.len(),
            });
        }
        if offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid("offsets", "must be finite"));
        }
        let node_rates = offsets.iter().map(|&o| o + rates.detuning).collect();
        Self::build(grid, node_rates, rates, kernel)
    }

    fn build(
        grid: &EnergyGrid,
        node_rates: Vec<f64>,
        rates: &RateSet,
        kernel: &KernelSpec,
    ) -> Result<Self> {
        let weights = grid.weights().to_vec();
        let (coupling, exchange_bound) = match kernel {
            KernelSpec::InfiniteRange => (Coupling::Mean, 1.0),
            _ => {
                let k = build_kernel_matrix(grid, kernel)?;
                let n = k.dim();
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|i| (0..n).map(|j| weights[j] * k.get(i, j)).collect())
                    .collect();
                // The diagonal term Sᵢ × Sᵢ vanishes, so it does not bound the torque.
                let bound = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        r.iter()
                            .enumerate()
                            .filter(|&(j, _)| j != i)
                            .map(|(_, v)| v)
                            .sum::<f64>()
                    })
                    .fold(0.0, f64::max);
                (Coupling::Weighted(weighted_matrix(rows)), bound)
            }
        };
        Ok(KineticModel {
            weights,
            node_rates,
            exchange: rates.effective_exchange(),
            gamma_c: rates.gamma_c,
            coupling,
            exchange_bound,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Upper bound on the fastest rate in the linearized dynamics, 1/s.
    pub fn max_rate(&self) -> f64 {
        let precession = self.node_rates.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        precession + self.exchange.abs() * self.exchange_bound + self.gamma_c
    }

    /// Largest step accepted by [`KineticModel::evolve`].
    pub fn stability_limit(&self) -> f64 {
        let rate = self.max_rate();
        if rate > 0.0 {
            RK4_STABILITY_LIMIT / rate
        } else {
            f64::INFINITY
        }
    }

    /// Step at which every node, including the fastest, is integrated to
    /// near rounding accuracy. `None` when all rates vanish.
    pub fn suggested_step(&self) -> Option<f64> {
        let rate = self.max_rate();
        (rate > 0.0).then(|| SUGGESTED_STEP_FACTOR / rate)
    }

    pub fn mean(&self, spins: &[SpinVector]) -> SpinVector {
        weighted_sum(&self.weights, spins)
    }

    /// dS/dt for every node, written into `out`.
    pub fn derivative(&self, spins: &[SpinVector], out: &mut [SpinVector]) {
        let mean = self.mean(spins);
        let damping = self.gamma_c;
        match &self.coupling {
            Coupling::Mean => {
                let field = mean * self.exchange;
                for ((d, &s), &w) in out.iter_mut().zip(spins).zip(&self.node_rates) {
                    *d = torque(w, field, s) - damping * (s - mean);
                }
            }
            Coupling::Weighted(k) => {
                for (i, (d, &s)) in out.iter_mut().zip(spins).enumerate() {
                    let m = weighted_sum(k.row(i), spins);
                    *d = torque(self.node_rates[i], m * self.exchange, s) - damping * (s - mean);
                }
            }
        }
    }

    /// Integrates from `initial` for `t_final` seconds. The step is
    /// t_final/⌈t_final/dt⌉ (so never larger than `dt`). S̄ is sampled at
    /// t = 0, every `sample_every` steps, and at t_final.
    pub fn evolve(
        &self,
        initial: &SpinField,
        t_final: f64,
        dt: f64,
        sample_every: usize,
    ) -> Result<Trajectory> {
        if initial.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: initial.len(),
            });
        }
        if !initial.is_finite() {
            return Err(Error::NonFinite {
                time: initial.time,
                node: initial
                    .spins
                    .iter()
                    .position(|s| !s.is_finite())
                    .unwrap_or(0),
            });
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::invalid("t_final", "must be finite and > 0"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", "must be finite and > 0"));
        }
        if sample_every == 0 {
            return Err(Error::invalid("sample_every", "must be >= 1"));
        }

        let steps = step_count(t_final, dt);
        let h = t_final / steps as f64;
        let limit = self.stability_limit();
        if h > limit {
            return Err(Error::UnstableStep { dt: h, limit });
        }

        let n = self.len();
        let mut s = initial.spins.clone();
        let mut k1 = vec![SpinVector::ZERO; n];
        let mut k2 = vec![SpinVector::ZERO; n];
        let mut k3 = vec![SpinVector::ZERO; n];
        let mut k4 = vec![SpinVector::ZERO; n];
        let mut tmp = vec![SpinVector::ZERO; n];

        let t0 = initial.time;
        let mut curve = ContrastCurve::with_capacity(steps / sample_every + 2);
        curve.push(t0, self.mean(&s))?;

        for step in 1..=steps {
            self.derivative(&s, &mut k1);
            stage(&s, &k1, 0.5 * h, &mut tmp);
            self.derivative(&tmp, &mut k2);
            stage(&s, &k2, 0.5 * h, &mut tmp);
            self.derivative(&tmp, &mut k3);
            stage(&s, &k3, h, &mut tmp);
            self.derivative(&tmp, &mut k4);
            let c = h / 6.0;
            for i in 0..n {
                let inc = k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i];
                s[i].axpy(c, inc);
            }

            let t = t0 + step as f64 * h;
            if let Some(node) = s.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { time: t, node });
            }
            if step % sample_every == 0 || step == steps {
                curve.push(t, self.mean(&s))?;
            }
        }

        Ok(Trajectory {
            curve,
            final_state: SpinField {
                spins: s,
                time: t0 + t_final,
            },
        })
    }
}

fn weighted_matrix(rows: Vec<Vec<f64>>) -> KernelMatrix {
    // Weighted rows are no longer symmetric, so skip KernelMatrix validation.
    KernelMatrix::from_rows_unchecked(rows)
}

/// (ω u∥ + field) × s
#[inline]
fn torque(omega_par: f64, field: SpinVector, s: SpinVector) -> SpinVector {
    let b = SpinVector::new(field.perp1, field.perp2, field.par + omega_par);
    b.cross(s)
}

#[inline]
fn stage(s: &[SpinVector], k: &[SpinVector], h: f64, out: &mut [SpinVector]) {
    for ((o, &si), &ki) in out.iter_mut().zip(s).zip(k) {
        *o = si;
        o.axpy(h, ki);
    }
}

fn step_count(t_final: f64, dt: f64) -> usize {
    let ratio = t_final / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded.max(1.0) as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Output of an integration: the sampled curve and the final spin density.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub curve: ContrastCurve,
    pub final_state: SpinField,
}

/// dS/dt of the kinetic equation for a whole field.
pub fn rhs(
    field: &SpinField,
    grid: &EnergyGrid,
    rates: &RateSet,
    kernel: &KernelSpec,
) -> Result<Vec<SpinVector>> {
    if field.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: field.len(),
        });
    }
    if !field.is_finite() {
        return Err(Error::NonFinite {
            time: field.time,
            node: field.spins.iter().position(|s| !s.is_finite()).unwrap_or(0),
        });
    }
    let model = KineticModel::new(grid, rates, kernel)?;
    let mut out = vec![SpinVector::ZERO; field.len()];
    model.derivative(&field.spins, &mut out);
    Ok(out)
}

/// Integrates the kinetic equation and returns the sampled contrast curve.
pub fn evolve(
    initial: &SpinField,
    grid: &EnergyGrid,
    rates: &RateSet,
    kernel: &KernelSpec,
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> Result<ContrastCurve> {
    let model = KineticModel::new(grid, rates, kernel)?;
    Ok(model.evolve(initial, t_final, dt, sample_every)?.curve)
}

/// Contrast without exchange or collisions for S(E, 0) = u⊥1:
/// |S̄(t)| = (1 + (Δ₀t)²)^(−3/2). Expects t >= 0.
pub fn analytic_contrast(delta0: f64, t: f64) -> f64 {
    let x = delta0 * t;
    (1.0 + x * x).powf(-1.5)
}
