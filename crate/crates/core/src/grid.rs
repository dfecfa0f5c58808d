//! Quadrature grids for ensemble averages over the 3D harmonic-oscillator
//! energy distribution (E²/2)·e^(−E), with E in units of k_BT.
//!
//! Three rules are available:
//!
//! * [`GridScheme::GaussLaguerreAlpha2`]: generalized Gauss–Laguerre with
//!   weight E²e^(−E). Exact for polynomial moments up to degree 2n−1, but its
//!   nodes reach E ≈ 4n, which makes the precession term stiff and resolves the
//!   oscillating average e^(iΔ₀Et) poorly unless n is large.
//! * [`GridScheme::GaussLegendreTruncated`]: Gauss–Legendre on [0, e_max] with
//!   the density folded into the weights. This is the default: 48 nodes on
//!   [0, 24] reproduce the free-dephasing contrast to ~3e-7 over 0.5 s at
//!   Δ₀/2π = 2 Hz.
//! * [`GridScheme::UniformTruncated`]: midpoint rule, needed by the 1D kernel.
//!
//! Truncated rules are renormalized to unit total weight; the missing tail
//! mass is kept in [`EnergyGrid::tail_deficit`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;

use crate::error::{Error, Result};
use crate::spin::{SpinField, SpinVector};

pub const DEFAULT_POINTS: usize = 48;
pub const DEFAULT_E_MAX: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    GaussLaguerreAlpha2,
    GaussLegendreTruncated,
    UniformTruncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    scheme: GridScheme,
    e_max: Option<f64>,
    tail_deficit: f64,
}

impl Default for EnergyGrid {
    fn default() -> Self {
        EnergyGrid::gauss_legendre(DEFAULT_POINTS, DEFAULT_E_MAX)
            .expect("default grid parameters are valid")
    }
}

impl EnergyGrid {
    /// Generalized Gauss–Laguerre rule for ∫(E²/2)e^(−E) f(E) dE.
    pub fn gauss_laguerre(n_points: usize) -> Result<Self> {
        if !(2..=256).contains(&n_points) {
            return Err(Error::invalid("n_points", "Gauss rules need 2 <= n <= 256"));
        }
        let n = n_points;
        let alpha = 2.0;
        // Jacobi matrix of the monic generalized Laguerre recurrence.
        let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
        let off: Vec<f64> = (1..n)
            .map(|k| (k as f64 * (k as f64 + alpha)).sqrt())
            .collect();
        let mut nodes = golub_welsch(&diag, &off);

        let norm = ((n + 1) * (n + 2)) as f64;
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            *x = polish(*x, |x| laguerre2(n, x));
            let (_, d, log_scale) = laguerre2(n, *x);
            // w = Γ(n+3) / (n! · x · L'(x)²), halved for the 1/2 in the density
            let ln_w = norm.ln() - x.ln() - 2.0 * (d.abs().ln() + log_scale);
            weights.push((0.5 * ln_w.exp()).max(f64::MIN_POSITIVE));
        }

        Ok(EnergyGrid {
            nodes,
            weights,
            scheme: GridScheme::GaussLaguerreAlpha2,
            e_max: None,
            tail_deficit: 0.0,
        })
    }

    /// Gauss–Legendre rule on [0, e_max] with weights (E²/2)e^(−E)·w_GL.
    pub fn gauss_legendre(n_points: usize, e_max: f64) -> Result<Self> {
        if !(2..=256).contains(&n_points) {
            return Err(Error::invalid("n_points", "Gauss rules need 2 <= n <= 256"));
        }
        if !(e_max.is_finite() && e_max >= 8.0) {
            return Err(Error::invalid("e_max", "must be finite and >= 8"));
        }
        let n = n_points;
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            })
            .collect();
        let mut xs = golub_welsch(&diag, &off);
        let half = 0.5 * e_max;
        let mut nodes = Vec::with_capacity(n);
        let mut raw = Vec::with_capacity(n);
        for x in xs.iter_mut() {
            *x = polish(*x, |x| legendre(n, x));
            let (_, d, _) = legendre(n, *x);
            let w = 2.0 / ((1.0 - *x * *x) * d * d);
            let e = half * (*x + 1.0);
            nodes.push(e);
            raw.push(half * w * density(e));
        }
        Ok(Self::normalized(
            nodes,
            raw,
            GridScheme::GaussLegendreTruncated,
            e_max,
        ))
    }

    /// Midpoint rule on (0, e_max].
    pub fn uniform(n_points: usize, e_max: f64) -> Result<Self> {
        if n_points < 8 {
            return Err(Error::invalid("n_points", "uniform grid needs n >= 8"));
        }
        if !(e_max.is_finite() && e_max >= 8.0) {
            return Err(Error::invalid("e_max", "must be finite and >= 8"));
        }
        let h = e_max / n_points as f64;
        let nodes: Vec<f64> = (0..n_points).map(|i| (i as f64 + 0.5) * h).collect();
        let raw: Vec<f64> = nodes.iter().map(|&e| density(e) * h).collect();
        Ok(Self::normalized(
            nodes,
            raw,
            GridScheme::UniformTruncated,
            e_max,
        ))
    }

    /// A grid with explicitly given nodes and weights. Weights must be
    /// positive and sum to one; nodes strictly increasing.
    pub fn from_parts(nodes: Vec<f64>, weights: Vec<f64>, scheme: GridScheme) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: nodes.len(),
                found: weights.len(),
            });
        }
        if nodes.len() < 2 {
            return Err(Error::invalid("nodes", "need at least 2 nodes"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("nodes", "must be strictly increasing"));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("weights", "must be positive and finite"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::invalid("weights", format!("sum to {sum}, not 1")));
        }
        Ok(EnergyGrid {
            nodes,
            weights,
            scheme,
            e_max: None,
            tail_deficit: 0.0,
        })
    }

    fn normalized(nodes: Vec<f64>, mut raw: Vec<f64>, scheme: GridScheme, e_max: f64) -> Self {
        let total: f64 = raw.iter().sum();
        raw.iter_mut().for_each(|w| *w /= total);
        EnergyGrid {
            nodes,
            weights: raw,
            scheme,
            e_max: Some(e_max),
            tail_deficit: 1.0 - total,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn e_max(&self) -> Option<f64> {
        self.e_max
    }

    /// 1 − Σ(raw weights) before renormalization; zero for Gauss–Laguerre.
    pub fn tail_deficit(&self) -> f64 {
        self.tail_deficit
    }

    pub fn max_node(&self) -> f64 {
        *self.nodes.last().expect("grid is nonempty")
    }

    /// Σ wᵢ Eᵢᵏ.
    pub fn moment(&self, k: i32) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&e, &w)| w * e.powi(k))
            .sum()
    }

    /// Ensemble average S̄ = Σ wᵢ S(Eᵢ).
    pub fn average(&self, field: &SpinField) -> Result<SpinVector> {
        self.average_spins(&field.spins)
    }

    pub fn average_spins(&self, spins: &[SpinVector]) -> Result<SpinVector> {
        if spins.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: spins.len(),
            });
        }
        Ok(weighted_sum(&self.weights, spins))
    }

    /// SHA-256 over the little-endian bytes of nodes then weights.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in self.nodes.iter().chain(&self.weights) {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "e,weight")?;
        for (e, w) in self.nodes.iter().zip(&self.weights) {
            writeln!(out, "{e:.16e},{w:.16e}")?;
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn weighted_sum(weights: &[f64], spins: &[SpinVector]) -> SpinVector {
    let mut acc = SpinVector::ZERO;
    for (&w, &s) in weights.iter().zip(spins) {
        acc.axpy(w, s);
    }
    acc
}

fn density(e: f64) -> f64 {
    0.5 * e * e * (-e).exp()
}

/// Eigenvalues of the symmetric tridiagonal Jacobi matrix, ascending.
fn golub_welsch(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
    }
    for (i, &b) in off.iter().enumerate() {
        m[(i, i + 1)] = b;
        m[(i + 1, i)] = b;
    }
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Newton refinement of a root using (p, p', _) from `eval`.
fn polish(mut x: f64, eval: impl Fn(f64) -> (f64, f64, f64)) -> f64 {
    for _ in 0..8 {
        let (p, d, _) = eval(x);
        let dx = p / d;
        x -= dx;
        if dx.abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            break;
        }
    }
    x
}

/// L_n^(2)(x) and its derivative, both divided by e^(log_scale).
fn laguerre2(n: usize, x: f64) -> (f64, f64, f64) {
    let alpha = 2.0;
    let mut prev = 1.0;
    let mut cur = 1.0 + alpha - x;
    let mut log_scale = 0.0;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            prev *= 1e-150;
            cur *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    let nf = n as f64;
    let d = (nf * cur - (nf + alpha) * prev) / x;
    (cur, d, log_scale)
}

/// P_n(x) and P_n'(x).
fn legendre(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    let nf = n as f64;
    let d = nf * (x * cur - prev) / (x * x - 1.0);
    (cur, d, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Γ(k+3)/2 = (k+2)!/2, the k-th moment of the Gamma(3, 1) law.
    fn gamma3_moment(k: i32) -> f64 {
        (1..=(k + 2)).map(f64::from).product::<f64>() / 2.0
    }

    #[test]
    fn laguerre_low_order_moments() {
        for n in [2, 3, 5, 16, 48, 100] {
            let g = EnergyGrid::gauss_laguerre(n).unwrap();
            assert!((g.moment(0) - 1.0).abs() < 1e-12, "n={n}");
            assert!((g.moment(1) - 3.0).abs() < 1e-11, "n={n}");
            if n >= 3 {
                assert!((g.moment(2) - 12.0).abs() < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn laguerre_exact_to_degree_2n_minus_1() {
        for n in 2..=48 {
            let g = EnergyGrid::gauss_laguerre(n).unwrap();
            for k in 0..=(2 * n as i32 - 1) {
                let exact = gamma3_moment(k);
                let rel = (g.moment(k) - exact).abs() / exact;
                assert!(rel < 1e-9, "n={n} k={k} rel={rel:e}");
            }
        }
    }

    #[test]
    fn laguerre_two_point_rule_by_hand() {
        // L_2^(2)(x) = (x² − 8x + 12)/2 has roots 2 and 6;
        // weights from w0 + w1 = 1, 2w0 + 6w1 = 3.
        let g = EnergyGrid::gauss_laguerre(2).unwrap();
        assert_relative_eq!(g.nodes()[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(g.nodes()[1], 6.0, max_relative = 1e-14);
        assert_relative_eq!(g.weights()[0], 0.75, max_relative = 1e-14);
        assert_relative_eq!(g.weights()[1], 0.25, max_relative = 1e-14);
    }

    #[test]
    fn gauss_range_checked() {
        assert!(EnergyGrid::gauss_laguerre(1).is_err());
        assert!(EnergyGrid::gauss_laguerre(257).is_err());
        assert!(EnergyGrid::gauss_laguerre(256).is_ok());
        assert!(EnergyGrid::gauss_legendre(1, 24.0).is_err());
        assert!(EnergyGrid::gauss_legendre(48, 4.0).is_err());
    }

    #[test]
    fn laguerre_256_weights_positive_and_normalized() {
        let g = EnergyGrid::gauss_laguerre(256).unwrap();
        assert!(g.weights().iter().all(|&w| w > 0.0));
        assert!((g.moment(0) - 1.0).abs() < 1e-10);
        assert!((g.moment(1) - 3.0).abs() < 1e-8);
    }

    #[test]
    fn default_grid_moments() {
        let g = EnergyGrid::default();
        assert_eq!(g.len(), 48);
        assert_eq!(g.scheme(), GridScheme::GaussLegendreTruncated);
        assert!((g.moment(0) - 1.0).abs() < 1e-13);
        // truncation at 24 removes ≈ e^(−24)(24³+3·24²+6·24+6)/2 ≈ 3e-7 from the mean
        assert!((g.moment(1) - 3.0).abs() < 1e-6);
        assert!(g.tail_deficit() > 0.0 && g.tail_deficit() < 1e-7);
        assert!(g.max_node() < 24.0);
    }

    #[test]
    fn uniform_tail_deficit() {
        // tail of (E²/2)e^(−E) beyond 12 = e^(−12)(1 + 12 + 72)
        let tail = (-12.0f64).exp() * 85.0;
        let g = EnergyGrid::uniform(20_000, 12.0).unwrap();
        assert!(
            (g.tail_deficit() - tail).abs() < 1e-8,
            "{}",
            g.tail_deficit()
        );
        assert!((tail - 5.2e-4).abs() < 1e-5);
    }

    #[test]
    fn uniform_small_grid_is_normalized() {
        let g = EnergyGrid::uniform(8, 12.0).unwrap();
        assert_eq!(g.len(), 8);
        assert!((g.moment(0) - 1.0).abs() < 1e-15);
        assert!(EnergyGrid::uniform(7, 12.0).is_err());
        assert!(EnergyGrid::uniform(8, 7.9).is_err());
    }

    #[test]
    fn uniform_mean_converges() {
        let g = EnergyGrid::uniform(4000, 40.0).unwrap();
        assert!((g.moment(1) - 3.0).abs() < 1e-5);
    }

    #[test]
    fn average_constant_and_first_moment() {
        let g = EnergyGrid::default();
        let v = SpinVector::new(0.2, -0.5, 0.7);
        let avg = g.average(&SpinField::uniform(g.len(), v)).unwrap();
        assert!((avg - v).norm() < 1e-14);

        let lg = EnergyGrid::gauss_laguerre(16).unwrap();
        let field = SpinField {
            spins: lg
                .nodes()
                .iter()
                .map(|&e| SpinVector::U_PERP1 * (e / 3.0))
                .collect(),
            time: 0.0,
        };
        let avg = lg.average(&field).unwrap();
        assert!((avg - SpinVector::U_PERP1).norm() < 1e-13);
    }

    #[test]
    fn average_cancels_opposite_halves() {
        // Two-node rule 3/4, 1/4 cannot be split evenly, so use an explicit grid.
        let g = EnergyGrid::from_parts(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.25, 0.25, 0.25, 0.25],
            GridScheme::UniformTruncated,
        )
        .unwrap();
        let u = SpinVector::U_PERP1;
        let field = SpinField {
            spins: vec![u, -u, u, -u],
            time: 0.0,
        };
        assert!(g.average(&field).unwrap().norm() < 1e-15);
    }

    #[test]
    fn average_length_mismatch() {
        let g = EnergyGrid::default();
        let r = g.average(&SpinField::coherent(3));
        assert!(matches!(r, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn checksum_is_stable_and_sensitive() {
        let a = EnergyGrid::default();
        let b = EnergyGrid::default();
        assert_eq!(a.checksum(), b.checksum());
        assert_eq!(a.checksum().len(), 64);
        let c = EnergyGrid::gauss_legendre(49, DEFAULT_E_MAX).unwrap();
        assert_ne!(a.checksum(), c.checksum());
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let g = EnergyGrid::uniform(8, 12.0).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("e,weight"));
        assert_eq!(text.lines().count(), 9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn field(len: usize, seed: &[f64]) -> SpinField {
            SpinField {
                spins: (0..len)
                    .map(|i| {
                        let a = seed[i % seed.len()];
                        SpinVector::new(a.sin(), (2.0 * a).cos(), a * 0.3)
                    })
                    .collect(),
                time: 0.0,
            }
        }

        proptest! {
            #[test]
            fn average_is_linear(
                alpha in -5.0f64..5.0,
                beta in -5.0f64..5.0,
                s1 in proptest::collection::vec(-3.0f64..3.0, 1..8),
                s2 in proptest::collection::vec(-3.0f64..3.0, 1..8),
            ) {
                let g = EnergyGrid::default();
                let f = field(g.len(), &s1);
                let h = field(g.len(), &s2);
                let combo = SpinField {
                    spins: f.spins.iter().zip(&h.spins).map(|(&a, &b)| alpha * a + beta * b).collect(),
                    time: 0.0,
                };
                let lhs = g.average(&combo).unwrap();
                let rhs = alpha * g.average(&f).unwrap() + beta * g.average(&h).unwrap();
                prop_assert!((lhs - rhs).norm() < 1e-13 * (1.0 + alpha.abs() + beta.abs()) * 3.0);
            }
        }
    }
}
