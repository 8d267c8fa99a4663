//! Learning-based model predictive control for multirotors, built on the
//! differential flatness of the rigid-body model.
//!
//! The crate is `no_std` (with `alloc`) and contains every numerical piece
//! of the controller:
//!
//! * [`flat`]: the flat triple-integrator model, reference generators and
//!   tracking costs.
//! * [`gp`]: per-axis Gaussian-process regression of the aerodynamic
//!   disturbance and its first-order linearization about a reference point.
//! * [`conic`]: quantile functions, cone/half-space projections and the
//!   compilation of probabilistic thrust constraints into second-order cones.
//! * [`solver`]: the two-rate ADMM solver (low-rate plan, high-rate
//!   iterations).
//! * [`sim`]: rigid-body multirotor dynamics, the flat-output-to-command map
//!   and disturbance measurement.
//!
//! IO, wall-clock timing and the experiment harness live in the companion
//! `lbmpc` crate.
#![no_std]
#![allow(clippy::needless_range_loop)]
// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod conic;
pub mod error;
pub mod flat;
pub mod gp;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};

use nalgebra::{SMatrix, SVector};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

/// Flat state dimension `[p, v, a, psi]`.
pub const STATE_DIM: usize = 10;
/// Flat input dimension `[jerk, psi_dot]`.
pub const INPUT_DIM: usize = 4;
/// Augmented linearization vector dimension `[1, z - z_ref]`.
pub const AUG_DIM: usize = STATE_DIM + 1;
/// Number of intermediate bound variables per stage.
pub const GAMMA_DIM: usize = 9;

pub type Vector3 = nalgebra::Vector3<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;
pub type StateVector = SVector<f64, STATE_DIM>;
pub type InputVector = SVector<f64, INPUT_DIM>;
pub type AugVector = SVector<f64, AUG_DIM>;
pub type GammaVector = SVector<f64, GAMMA_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type InputMatrix = SMatrix<f64, STATE_DIM, INPUT_DIM>;
pub type GainMatrix = SMatrix<f64, INPUT_DIM, STATE_DIM>;
pub type InputWeight = SMatrix<f64, INPUT_DIM, INPUT_DIM>;
pub type AugMatrix = SMatrix<f64, AUG_DIM, AUG_DIM>;
