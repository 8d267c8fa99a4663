//! Rigid-body multirotor with rotor drag, the flat-output-to-command map and
//! disturbance measurement.

use nalgebra::Rotation3;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;
use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::flat::{ACC, POS, VEL, YAW};
use crate::gp::LinGpStage;
use crate::{Error, InputVector, Matrix3, Result, StateVector, Vector3, GRAVITY};

/// Smallest collective thrust the command map accepts, m/s².
pub const MIN_THRUST: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub p: Vector3,
    pub v: Vector3,
    /// Body-to-world rotation.
    pub rot: Matrix3,
    pub t: f64,
}

impl SimState {
    pub fn hover(p: Vector3) -> Self {
        Self { p, v: Vector3::zeros(), rot: Matrix3::identity(), t: 0.0 }
    }

    pub fn yaw(&self) -> f64 {
        yaw_of(&self.rot)
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).chain(self.rot.iter()).all(|x| x.is_finite())
    }
}

/// Collective mass-normalized thrust and body rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub c: f64,
    pub omega: Vector3,
}

impl Command {
    pub fn hover() -> Self {
        Self { c: GRAVITY, omega: Vector3::zeros() }
    }
}

/// Diagonal rotor-drag coefficients, 1/s. `sign = -1` decelerates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragModel {
    pub d: Vector3,
    pub sign: f64,
}

impl Default for DragModel {
    fn default() -> Self {
        Self { d: Vector3::zeros(), sign: -1.0 }
    }
}

impl DragModel {
    pub fn new(d: Vector3) -> Result<Self> {
        if d.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter("drag coefficients must be non-negative"));
        }
        Ok(Self { d, sign: -1.0 })
    }

    /// Literal `+R D R' v` term (anti-damping for `D > 0`).
    pub fn with_literal_sign(mut self) -> Self {
        self.sign = 1.0;
        self
    }

    pub fn acceleration(&self, rot: &Matrix3, v: &Vector3) -> Vector3 {
        rot * Matrix3::from_diagonal(&self.d) * rot.transpose() * v * self.sign
    }
}

fn hat(w: &Vector3) -> Matrix3 {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Yaw of a rotation, `atan2(R_10, R_00)`.
pub fn yaw_of(rot: &Matrix3) -> f64 {
    rot[(1, 0)].atan2(rot[(0, 0)])
}

/// Translational acceleration `-g e_z + c z_B + f_d`.
pub fn acceleration(state: &SimState, cmd: &Command, drag: &DragModel) -> Vector3 {
    -Vector3::z() * GRAVITY + state.rot.column(2) * cmd.c + drag.acceleration(&state.rot, &state.v)
}

/// Nearest rotation in Frobenius norm.
pub fn orthonormalize(m: &Matrix3) -> Matrix3 {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut fix = Matrix3::identity();
        fix[(2, 2)] = -1.0;
        r = u * fix * vt;
    }
    r
}

/// One RK4 step with the command held constant.
pub fn step(state: &SimState, cmd: &Command, drag: &DragModel, dt: f64) -> Result<SimState> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    let omega = hat(&cmd.omega);
    let deriv = |s: &SimState| -> (Vector3, Vector3, Matrix3) { (s.v, acceleration(s, cmd, drag), s.rot * omega) };
    let offset = |s: &SimState, k: &(Vector3, Vector3, Matrix3), h: f64| SimState {
        p: s.p + k.0 * h,
        v: s.v + k.1 * h,
        rot: s.rot + k.2 * h,
        t: s.t + h,
    };
    let k1 = deriv(state);
    let k2 = deriv(&offset(state, &k1, 0.5 * dt));
    let k3 = deriv(&offset(state, &k2, 0.5 * dt));
    let k4 = deriv(&offset(state, &k3, dt));
    let w = dt / 6.0;
    let next = SimState {
        p: state.p + (k1.0 + (k2.0 + k3.0) * 2.0 + k4.0) * w,
        v: state.v + (k1.1 + (k2.1 + k3.1) * 2.0 + k4.1) * w,
        rot: state.rot + (k1.2 + (k2.2 + k3.2) * 2.0 + k4.2) * w,
        t: state.t + dt,
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteState(next.t));
    }
    Ok(SimState { rot: orthonormalize(&next.rot), ..next })
}

/// Flat state `[p, v, a, psi]` from simulator truth and an acceleration.
pub fn flat_state_of(state: &SimState, acc: &Vector3) -> StateVector {
    let mut z = StateVector::zeros();
    z.fixed_rows_mut::<3>(POS).copy_from(&state.p);
    z.fixed_rows_mut::<3>(VEL).copy_from(&state.v);
    z.fixed_rows_mut::<3>(ACC).copy_from(acc);
    z[YAW] = state.yaw();
    z
}

/// Command and desired attitude for a flat state and input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatCommand {
    pub cmd: Command,
    pub attitude: Matrix3,
    /// Thrust vector `a + g e_z - mu(z)`.
    pub thrust: Vector3,
}

/// Map a flat state and input to thrust and body rates.
///
/// `c = a + g e_z - mu(z)`, `z_B = c / |c|`, `x_B ∝ y_C × z_B` with
/// `y_C = [-sin psi, cos psi, 0]`. With `c' = j - J_mu z'`:
/// `w_x = -y_B·c'/|c|`, `w_y = x_B·c'/|c|`,
/// `w_z = (psi' x_C·x_B + w_y y_C·z_B) / |y_C × z_B|`.
pub fn flat_to_command(z: &StateVector, v: &InputVector, gp: Option<&LinGpStage>) -> Result<FlatCommand> {
    let acc = z.fixed_rows::<3>(ACC).into_owned();
    let jerk = v.fixed_rows::<3>(0).into_owned();
    let (mu, dmu) = match gp {
        Some(lin) => {
            let mut zdot = StateVector::zeros();
            zdot.fixed_rows_mut::<3>(POS).copy_from(&z.fixed_rows::<3>(VEL));
            zdot.fixed_rows_mut::<3>(VEL).copy_from(&acc);
            zdot.fixed_rows_mut::<3>(ACC).copy_from(&jerk);
            zdot[YAW] = v[3];
            (lin.mean(z), lin.mean_jacobian() * zdot)
        }
        None => (Vector3::zeros(), Vector3::zeros()),
    };
    let thrust = acc + Vector3::z() * GRAVITY - mu;
    let c = thrust.norm();
    if !(c >= MIN_THRUST) {
        return Err(Error::FreeFall(c));
    }
    let zb = thrust / c;
    let psi = z[YAW];
    let (s, co) = psi.sin_cos();
    let xc = Vector3::new(co, s, 0.0);
    let yc = Vector3::new(-s, co, 0.0);
    let cross = yc.cross(&zb);
    let cross_norm = cross.norm();
    if !(cross_norm > MIN_THRUST) {
        return Err(Error::FreeFall(c));
    }
    let xb = cross / cross_norm;
    let yb = zb.cross(&xb);
    let cdot = jerk - dmu;
    let wx = -yb.dot(&cdot) / c;
    let wy = xb.dot(&cdot) / c;
    let wz = (v[3] * xc.dot(&xb) + wy * yc.dot(&zb)) / cross_norm;
    Ok(FlatCommand {
        cmd: Command { c, omega: Vector3::new(wx, wy, wz) },
        attitude: Matrix3::from_columns(&[xb, yb, zb]),
        thrust,
    })
}

/// Body-rate correction `gain * log(R' R_des)`.
pub fn attitude_feedback(rot: &Matrix3, desired: &Matrix3, gain: f64) -> Vector3 {
    Rotation3::from_matrix_unchecked(rot.transpose() * desired).scaled_axis() * gain
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSample {
    pub z: StateVector,
    pub d_hat: Vector3,
    pub noise_std: f64,
}

/// `d_hat = a + g e_z - c z_B + eta`, `eta ~ N(0, noise_std² I)`.
pub fn measure_disturbance<R: RngCore + ?Sized>(
    state: &SimState,
    cmd: &Command,
    accel_true: &Vector3,
    noise_std: f64,
    rng: &mut R,
) -> DisturbanceSample {
    let mut d_hat = accel_true + Vector3::z() * GRAVITY - state.rot.column(2) * cmd.c;
    if noise_std > 0.0 {
        for x in d_hat.iter_mut() {
            let n: f64 = StandardNormal.sample(rng);
            *x += noise_std * n;
        }
    }
    DisturbanceSample { z: flat_state_of(state, accel_true), d_hat, noise_std }
}
