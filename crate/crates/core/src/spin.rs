use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Bloch vector on the frame {u⊥1, u⊥2, u∥}.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpinVector {
    pub perp1: f64,
    pub perp2: f64,
    pub par: f64,
}

impl SpinVector {
    pub const ZERO: SpinVector = SpinVector::new(0.0, 0.0, 0.0);
    pub const U_PERP1: SpinVector = SpinVector::new(1.0, 0.0, 0.0);
    pub const U_PERP2: SpinVector = SpinVector::new(0.0, 1.0, 0.0);
    pub const U_PAR: SpinVector = SpinVector::new(0.0, 0.0, 1.0);

    pub const fn new(perp1: f64, perp2: f64, par: f64) -> Self {
        SpinVector { perp1, perp2, par }
    }

    #[inline]
    pub fn cross(self, o: SpinVector) -> SpinVector {
        SpinVector::new(
            self.perp2 * o.par - self.par * o.perp2,
            self.par * o.perp1 - self.perp1 * o.par,
            self.perp1 * o.perp2 - self.perp2 * o.perp1,
        )
    }

    #[inline]
    pub fn dot(self, o: SpinVector) -> f64 {
        self.perp1 * o.perp1 + self.perp2 * o.perp2 + self.par * o.par
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// |S⊥|, the coherence carried by the transverse components.
    pub fn transverse_norm(self) -> f64 {
        self.perp1.hypot(self.perp2)
    }

    pub fn is_finite(self) -> bool {
        self.perp1.is_finite() && self.perp2.is_finite() && self.par.is_finite()
    }

    /// Adds `k · v` in place.
    #[inline]
    pub fn axpy(&mut self, k: f64, v: SpinVector) {
        self.perp1 += k * v.perp1;
        self.perp2 += k * v.perp2;
        self.par += k * v.par;
    }
}

impl Add for SpinVector {
    type Output = SpinVector;
    fn add(self, o: SpinVector) -> SpinVector {
        SpinVector::new(self.perp1 + o.perp1, self.perp2 + o.perp2, self.par + o.par)
    }
}

impl AddAssign for SpinVector {
    fn add_assign(&mut self, o: SpinVector) {
        *self = *self + o;
    }
}

impl Sub for SpinVector {
    type Output = SpinVector;
    fn sub(self, o: SpinVector) -> SpinVector {
        SpinVector::new(self.perp1 - o.perp1, self.perp2 - o.perp2, self.par - o.par)
    }
}

impl Neg for SpinVector {
    type Output = SpinVector;
    fn neg(self) -> SpinVector {
        SpinVector::new(-self.perp1, -self.perp2, -self.par)
    }
}

impl Mul<f64> for SpinVector {
    type Output = SpinVector;
    fn mul(self, k: f64) -> SpinVector {
        SpinVector::new(k * self.perp1, k * self.perp2, k * self.par)
    }
}

impl Mul<SpinVector> for f64 {
    type Output = SpinVector;
    fn mul(self, v: SpinVector) -> SpinVector {
        v * self
    }
}

/// Spin density S(E, t): one vector per energy node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinField {
    pub spins: Vec<SpinVector>,
    /// s
    pub time: f64,
}

impl SpinField {
    pub fn uniform(len: usize, v: SpinVector) -> Self {
        SpinField {
            spins: vec![v; len],
            time: 0.0,
        }
    }

    /// S(E, 0) = u⊥1 on every node: coherent spins right after a π/2 pulse.
    pub fn coherent(len: usize) -> Self {
        Self::uniform(len, SpinVector::U_PERP1)
    }

    /// S(E, 0) = −u∥: every atom in |0⟩, the state before the first pulse.
    pub fn ground(len: usize) -> Self {
        Self::uniform(len, -SpinVector::U_PAR)
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite() && self.spins.iter().all(|s| s.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_right_handed() {
        assert_eq!(
            SpinVector::U_PERP1.cross(SpinVector::U_PERP2),
            SpinVector::U_PAR
        );
        assert_eq!(
            SpinVector::U_PERP2.cross(SpinVector::U_PAR),
            SpinVector::U_PERP1
        );
        assert_eq!(
            SpinVector::U_PAR.cross(SpinVector::U_PERP1),
            SpinVector::U_PERP2
        );
    }

    #[test]
    fn self_cross_is_exactly_zero() {
        let v = SpinVector::new(0.3, -1.7, 2.9e-3);
        assert_eq!(v.cross(v), SpinVector::ZERO);
    }

    #[test]
    fn transverse_norm_ignores_par() {
        let v = SpinVector::new(3.0, 4.0, 12.0);
        assert_eq!(v.transverse_norm(), 5.0);
        assert_eq!(v.norm(), 13.0);
    }
}
