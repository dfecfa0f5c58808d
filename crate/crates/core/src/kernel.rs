//! Exchange kernels K(E, E′) coupling spins at different energies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EnergyGrid, GridScheme};

pub const DEFAULT_ONED_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// K ≡ 1: every node feels the ensemble-mean spin.
    #[default]
    InfiniteRange,
    /// K₁(E, E′) = [max(E, E′)·|E − E′|]^(−1/4), with |E − E′| clamped
    /// below at `epsilon`. Only defined on uniform grids.
    OneD {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    /// Explicit symmetric, nonnegative matrix on the grid nodes.
    Matrix { matrix: KernelMatrix },
}

fn default_epsilon() -> f64 {
    DEFAULT_ONED_EPSILON
}

impl KernelSpec {
    pub fn one_d() -> Self {
        KernelSpec::OneD {
            epsilon: DEFAULT_ONED_EPSILON,
        }
    }
}

/// Dense row-major n×n matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    n: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend(row);
        }
        let m = KernelMatrix { n, data };
        m.validate()?;
        Ok(m)
    }

    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        KernelMatrix {
            n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        KernelMatrix { n, data }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.n * self.n {
            return Err(Error::LengthMismatch {
                expected: self.n * self.n,
                found: self.data.len(),
            });
        }
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(
                        "kernel",
                        format!("entry ({i}, {j}) = {v} must be finite and >= 0"),
                    ));
                }
                if (v - self.get(j, i)).abs() > 1e-12 {
                    return Err(Error::invalid(
                        "kernel",
                        format!("not symmetric at ({i}, {j})"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Samples the kernel on the grid nodes.
pub fn build_kernel_matrix(grid: &EnergyGrid, spec: &KernelSpec) -> Result<KernelMatrix> {
    let e = grid.nodes();
    let n = e.len();
    match spec {
        KernelSpec::InfiniteRange => Ok(KernelMatrix::from_fn(n, |_, _| 1.0)),
        KernelSpec::OneD { epsilon } => {
            if !(epsilon.is_finite() && *epsilon > 0.0) {
                return Err(Error::invalid("epsilon", "must be finite and > 0"));
            }
            if grid.scheme() != GridScheme::UniformTruncated {
                return Err(Error::KernelGrid("one_d"));
            }
            Ok(KernelMatrix::from_fn(n, |i, j| {
                one_d_kernel(e[i], e[j], *epsilon)
            }))
        }
        KernelSpec::Matrix { matrix } => {
            if matrix.dim() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: matrix.dim(),
                });
            }
            matrix.validate()?;
            Ok(matrix.clone())
        }
    }
}

/// [max(E, E′)·max(|E − E′|, ε)]^(−1/4).
pub fn one_d_kernel(e: f64, e_prime: f64, epsilon: f64) -> f64 {
    let gap = (e - e_prime).abs().max(epsilon);
    (e.max(e_prime) * gap).powf(-0.25)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_range_is_ones() {
        let g = EnergyGrid::default();
        let k = build_kernel_matrix(&g, &KernelSpec::InfiniteRange).unwrap();
        assert_eq!(k.dim(), g.len());
        assert!((0..g.len()).all(|i| k.row(i).iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn one_d_value() {
        // (4·3)^(−1/4) = 12^(−1/4) ≈ 0.5373
        let v = one_d_kernel(4.0, 1.0, 1e-6);
        assert!((v - 12f64.powf(-0.25)).abs() < 1e-15);
        assert!((v - 0.5373).abs() < 1e-4);
    }

    #[test]
    fn one_d_symmetric_and_regularized() {
        let g = EnergyGrid::uniform(64, 16.0).unwrap();
        let k = build_kernel_matrix(&g, &KernelSpec::one_d()).unwrap();
        for i in 0..k.dim() {
            assert!(k.get(i, i).is_finite());
            let e = g.nodes()[i];
            assert!((k.get(i, i) - (e * 1e-6).powf(-0.25)).abs() < 1e-9 * k.get(i, i));
            for j in 0..k.dim() {
                assert_eq!(k.get(i, j), k.get(j, i));
            }
        }
    }

    #[test]
    fn one_d_requires_uniform_grid() {
        let g = EnergyGrid::default();
        let r = build_kernel_matrix(&g, &KernelSpec::one_d());
        assert!(matches!(r, Err(Error::KernelGrid(_))));
    }

    #[test]
    fn matrix_kernel_checks() {
        let g = EnergyGrid::uniform(8, 12.0).unwrap();
        let bad_dim = KernelMatrix::from_rows(vec![vec![1.0; 2]; 2]).unwrap();
        assert!(build_kernel_matrix(&g, &KernelSpec::Matrix { matrix: bad_dim }).is_err());
        let mut rows = vec![vec![1.0; 3]; 3];
        rows[0][1] = 2.0;
        assert!(KernelMatrix::from_rows(rows).is_err());
        let mut rows = vec![vec![1.0; 3]; 3];
        rows[2][2] = -1.0;
        assert!(KernelMatrix::from_rows(rows).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let s: KernelSpec = serde_json::from_str(r#"{"kind":"one_d"}"#).unwrap();
        assert_eq!(s, KernelSpec::one_d());
        let s: KernelSpec = serde_json::from_str(r#"{"kind":"infinite_range"}"#).unwrap();
        assert_eq!(s, KernelSpec::InfiniteRange);
    }
}
