//! Simulation and analysis of spin self-rephasing in trapped atomic ensembles.
//!
//! The crate integrates an energy-space kinetic equation for the spin density
//! S(E, t) of a harmonically trapped gas, in which an energy-dependent
//! precession dephases the spins, an exchange mean field (the identical spin
//! rotation effect) makes them rotate around their sum, and lateral collisions
//! relax each energy class toward the ensemble mean. On top of the solver sit
//! a two-class toy model, an idealized Ramsey sequence, and the curve fits
//! used to analyse contrast decay, atom number and revival times.
//!
//! All rates are angular (rad/s) internally; see [`units`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curve;
pub mod error;
pub mod fit;
pub mod grid;
pub mod kernel;
pub mod kinetic;
pub mod ramsey;
pub mod rates;
pub mod spin;
pub mod two_class;
pub mod units;

pub use curve::ContrastCurve;
pub use error::{Error, Result};
pub use grid::{EnergyGrid, GridScheme};
pub use kernel::{build_kernel_matrix, KernelMatrix, KernelSpec};
pub use kinetic::{analytic_contrast, evolve, rhs, KineticModel, Trajectory};
pub use rates::{AtomicParams, DensityScaling, RateSet, Regime, RegimeReport, TrapParams};
pub use spin::{SpinField, SpinVector};
