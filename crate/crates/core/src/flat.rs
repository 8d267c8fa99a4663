//! Flat-space model: triple-integrator dynamics in `[p, v, a, psi]`,
//! reference generators and time-varying quadratic tracking costs.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::str::FromStr;

#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

use crate::{
    Error, GainMatrix, InputMatrix, InputVector, InputWeight, Result, StateMatrix, StateVector,
    Vector3,
};

/// Flat state `[p, v, a, psi]`. The vector layout is
/// `[p_x, p_y, p_z, v_x, v_y, v_z, a_x, a_y, a_z, psi]` everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatState {
    pub p: Vector3,
    pub v: Vector3,
    pub a: Vector3,
    pub psi: f64,
}

pub const POS: usize = 0;
pub const VEL: usize = 3;
pub const ACC: usize = 6;
pub const YAW: usize = 9;

impl FlatState {
    pub fn hover(p: Vector3, psi: f64) -> Self {
        Self { p, v: Vector3::zeros(), a: Vector3::zeros(), psi }
    }

    pub fn to_vector(&self) -> StateVector {
        let mut z = StateVector::zeros();
        z.fixed_rows_mut::<3>(POS).copy_from(&self.p);
        z.fixed_rows_mut::<3>(VEL).copy_from(&self.v);
        z.fixed_rows_mut::<3>(ACC).copy_from(&self.a);
        z[YAW] = self.psi;
        z
    }

    pub fn from_vector(z: &StateVector) -> Self {
        Self {
            p: z.fixed_rows::<3>(POS).into_owned(),
            v: z.fixed_rows::<3>(VEL).into_owned(),
            a: z.fixed_rows::<3>(ACC).into_owned(),
            psi: z[YAW],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

/// Flat input `[jerk, psi_dot]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatInput {
    pub jerk: Vector3,
    pub psi_dot: f64,
}

impl FlatInput {
    pub fn zero() -> Self {
        Self { jerk: Vector3::zeros(), psi_dot: 0.0 }
    }

    pub fn to_vector(&self) -> InputVector {
        InputVector::new(self.jerk.x, self.jerk.y, self.jerk.z, self.psi_dot)
    }

    pub fn from_vector(v: &InputVector) -> Self {
        Self { jerk: Vector3::new(v[0], v[1], v[2]), psi_dot: v[3] }
    }
}

/// Discrete flat dynamics `z+ = A z + B v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatLti {
    pub a: StateMatrix,
    pub b: InputMatrix,
    pub dt: f64,
}

impl FlatLti {
    pub fn step(&self, z: &StateVector, v: &InputVector) -> StateVector {
        self.a * z + self.b * v
    }
}

/// Exact zero-order-hold discretization of three triple integrators and a
/// yaw integrator.
pub fn discretize_flat(dt: f64) -> Result<FlatLti> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::NonPositiveStep(dt));
    }
    Ok(discretize_unchecked(dt))
}

fn discretize_unchecked(dt: f64) -> FlatLti {
    let mut a = StateMatrix::identity();
    let mut b = InputMatrix::zeros();
    let dt2 = dt * dt;
    for axis in 0..3 {
        a[(POS + axis, VEL + axis)] = dt;
        a[(POS + axis, ACC + axis)] = 0.5 * dt2;
        a[(VEL + axis, ACC + axis)] = dt;
        b[(POS + axis, axis)] = dt2 * dt / 6.0;
        b[(VEL + axis, axis)] = 0.5 * dt2;
        b[(ACC + axis, axis)] = dt;
    }
    b[(YAW, 3)] = dt;
    FlatLti { a, b, dt }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Figure8,
    SinusoidX,
    Circle,
    Hover,
}

impl FromStr for ReferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "figure8" | "figure-8" => Ok(Self::Figure8),
            "sinusoid-x" | "sinusoid_x" => Ok(Self::SinusoidX),
            "circle" => Ok(Self::Circle),
            "hover" => Ok(Self::Hover),
            other => Err(Error::UnknownReference(other.to_string())),
        }
    }
}

impl ReferenceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Figure8 => "figure8",
            Self::SinusoidX => "sinusoid-x",
            Self::Circle => "circle",
            Self::Hover => "hover",
        }
    }
}

/// Analytic reference generator. Positions are offsets from `center`; yaw
/// is held at `psi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceGenerator {
    pub kind: ReferenceKind,
    pub amplitude: f64,
    pub omega: f64,
    pub center: Vector3,
    pub psi: f64,
}

/// Position and its first three derivatives of `amp * sin(w t)` (or cos).
fn harmonic(amp: f64, w: f64, t: f64, cosine: bool) -> [f64; 4] {
    let (s, c) = (w * t).sin_cos();
    if cosine {
        [amp * c, -amp * w * s, -amp * w * w * c, amp * w * w * w * s]
    } else {
        [amp * s, amp * w * c, -amp * w * w * s, -amp * w * w * w * c]
    }
}

impl ReferenceGenerator {
    pub fn new(kind: ReferenceKind, amplitude: f64, omega: f64) -> Result<Self> {
        if !(omega >= 0.0) {
            return Err(Error::InvalidParameter("reference omega must be non-negative"));
        }
        Ok(Self { kind, amplitude, omega, center: Vector3::zeros(), psi: 0.0 })
    }

    /// The figure-8 used in the tracking study: `x = 0.5 sin(wt)`,
    /// `z = 0.5 sin(2wt)`.
    pub fn figure8(omega: f64) -> Result<Self> {
        Self::new(ReferenceKind::Figure8, 0.5, omega)
    }

    pub fn hover(center: Vector3) -> Self {
        Self { kind: ReferenceKind::Hover, amplitude: 0.0, omega: 0.0, center, psi: 0.0 }
    }

    pub fn with_center(mut self, center: Vector3) -> Self {
        self.center = center;
        self
    }

    /// Flat state and input at time `t`, by analytic differentiation.
    pub fn evaluate(&self, t: f64) -> (FlatState, FlatInput) {
        let (amp, w) = (self.amplitude, self.omega);
        let zero = [0.0; 4];
        let [x, y, z] = match self.kind {
            ReferenceKind::Figure8 => [harmonic(amp, w, t, false), zero, harmonic(amp, 2.0 * w, t, false)],
            ReferenceKind::SinusoidX => [harmonic(amp, w, t, false), zero, zero],
            ReferenceKind::Circle => [harmonic(amp, w, t, true), harmonic(amp, w, t, false), zero],
            ReferenceKind::Hover => [zero, zero, zero],
        };
        let derivative = |order: usize| Vector3::new(x[order], y[order], z[order]);
        let state = FlatState {
            p: self.center + derivative(0),
            v: derivative(1),
            a: derivative(2),
            psi: self.psi,
        };
        (state, FlatInput { jerk: derivative(3), psi_dot: 0.0 })
    }
}

/// Reference sampled on the uniform grid `t0 + i dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub generator: ReferenceGenerator,
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<FlatState>,
    pub inputs: Vec<FlatInput>,
}

impl ReferenceTrajectory {
    pub fn sample(generator: ReferenceGenerator, t0: f64, dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::NonPositiveStep(dt));
        }
        let (states, inputs) = (0..len).map(|i| generator.evaluate(t0 + i as f64 * dt)).unzip();
        Ok(Self { generator, t0, dt, states, inputs })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }
}

/// Stage, input and terminal weights for tracking.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingWeights {
    pub q: StateMatrix,
    pub r: InputWeight,
    pub q_terminal: StateMatrix,
}

impl Default for TrackingWeights {
    fn default() -> Self {
        let q = StateMatrix::from_diagonal(&StateVector::from_column_slice(&[
            100.0, 100.0, 100.0, 10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0,
        ]));
        let r = InputWeight::from_diagonal_element(0.1);
        Self { q, r, q_terminal: q }
    }
}

impl TrackingWeights {
    pub fn from_diagonals(q: &[f64; 10], r: &[f64; 4]) -> Self {
        let q = StateMatrix::from_diagonal(&StateVector::from_column_slice(q));
        let r = InputWeight::from_diagonal(&InputVector::from_column_slice(r));
        Self { q, r, q_terminal: q }
    }

    /// Replace the terminal weight by the infinite-horizon cost-to-go of
    /// `(A, B, Q, R)`, so a short horizon behaves like the infinite one.
    pub fn with_riccati_terminal(mut self, lti: &FlatLti) -> Result<Self> {
        self.q_terminal = crate::solver::riccati::dare(lti, &self.q, &self.r, 1e-11, 100_000)?;
        Ok(self)
    }
}

/// Linear cost terms; these change every control tick while the quadratic
/// terms are frozen in the plan.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCost {
    pub q: Vec<StateVector>,
    pub r: Vec<InputVector>,
    pub q_terminal: StateVector,
}

impl LinearCost {
    pub fn zeros(horizon: usize) -> Self {
        Self {
            q: alloc::vec![StateVector::zeros(); horizon],
            r: alloc::vec![InputVector::zeros(); horizon],
            q_terminal: StateVector::zeros(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.q.len()
    }
}

/// `sum_k 1/2 z'Q_k z + q_k'z + 1/2 v'Rv + r_k'v + 1/2 z_N'Q_f z_N + q_f'z_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadCost {
    pub q: Vec<StateMatrix>,
    pub r: InputWeight,
    pub q_terminal: StateMatrix,
    pub linear: LinearCost,
}

impl QuadCost {
    pub fn horizon(&self) -> usize {
        self.q.len()
    }

    /// Cost of a state sequence `z_0..z_N` and inputs `v_0..v_{N-1}`.
    pub fn evaluate(&self, states: &[StateVector], inputs: &[InputVector]) -> f64 {
        let n = self.horizon();
        let mut total = 0.0;
        for k in 0..n {
            let (z, v) = (&states[k], &inputs[k]);
            total += 0.5 * z.dot(&(self.q[k] * z)) + self.linear.q[k].dot(z);
            total += 0.5 * v.dot(&(self.r * v)) + self.linear.r[k].dot(v);
        }
        let zn = &states[n];
        total + 0.5 * zn.dot(&(self.q_terminal * zn)) + self.linear.q_terminal.dot(zn)
    }
}

/// Linear terms `q_k = -Q z_k^r`, `r_k = -R v_k^r`, `q_f = -Q_f z_N^r` for
/// the window `start..=start + horizon`.
pub fn tracking_linear_cost(
    reference: &ReferenceTrajectory,
    start: usize,
    horizon: usize,
    weights: &TrackingWeights,
) -> Result<LinearCost> {
    let end = start + horizon;
    if horizon == 0 {
        return Err(Error::EmptyHorizon);
    }
    if end >= reference.len() {
        return Err(Error::WindowOutOfRange { start, end, len: reference.len() });
    }
    let q = (start..end).map(|i| -(weights.q * reference.states[i].to_vector())).collect();
    let r = (start..end).map(|i| -(weights.r * reference.inputs[i].to_vector())).collect();
    let q_terminal = -(weights.q_terminal * reference.states[end].to_vector());
    Ok(LinearCost { q, r, q_terminal })
}

pub fn tracking_cost(
    reference: &ReferenceTrajectory,
    start: usize,
    horizon: usize,
    weights: &TrackingWeights,
) -> Result<QuadCost> {
    let linear = tracking_linear_cost(reference, start, horizon, weights)?;
    Ok(QuadCost {
        q: alloc::vec![weights.q; horizon],
        r: weights.r,
        q_terminal: weights.q_terminal,
        linear,
    })
}

/// Feedback gain of the stationary LQR, handy for comparisons.
pub fn stationary_gain(lti: &FlatLti, weights: &TrackingWeights) -> Result<GainMatrix> {
    let p = crate::solver::riccati::dare(lti, &weights.q, &weights.r, 1e-11, 100_000)?;
    let quu = weights.r + lti.b.transpose() * p * lti.b;
    let inv = quu.try_inverse().ok_or(Error::SingularInputHessian(0))?;
    Ok(inv * lti.b.transpose() * p * lti.a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    /// Matrix exponential of the augmented continuous system by a long
    /// Taylor series: independent of the closed-form blocks.
    fn zoh_by_series(dt: f64) -> (StateMatrix, InputMatrix) {
        let mut ac = nalgebra::SMatrix::<f64, 14, 14>::zeros();
        for axis in 0..3 {
            ac[(POS + axis, VEL + axis)] = 1.0;
            ac[(VEL + axis, ACC + axis)] = 1.0;
            ac[(ACC + axis, 10 + axis)] = 1.0;
        }
        ac[(YAW, 13)] = 1.0;
        let m = ac * dt;
        let mut term = nalgebra::SMatrix::<f64, 14, 14>::identity();
        let mut sum = term;
        for i in 1..30 {
            term = term * m / i as f64;
            sum += term;
        }
        (sum.fixed_view::<10, 10>(0, 0).into_owned(), sum.fixed_view::<10, 4>(0, 10).into_owned())
    }

    #[test]
    fn zoh_matches_series_expansion() {
        for dt in [0.001, 0.01, 0.1, 0.5] {
            let lti = discretize_flat(dt).unwrap();
            let (a, b) = zoh_by_series(dt);
            assert_relative_eq!(lti.a, a, epsilon = 1e-14);
            assert_relative_eq!(lti.b, b, epsilon = 1e-14);
        }
        let lti = discretize_flat(0.01).unwrap();
        assert_relative_eq!(lti.a[(0, 6)], 5e-5, epsilon = 1e-18);
        assert_relative_eq!(lti.b[(0, 0)], 1.0 / 6.0 * 1e-6, epsilon = 1e-18);
    }

    #[test]
    fn zero_step_limit_is_identity() {
        let lti = discretize_unchecked(0.0);
        assert_eq!(lti.a, StateMatrix::identity());
        assert_eq!(lti.b, InputMatrix::zeros());
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(matches!(discretize_flat(0.0), Err(Error::NonPositiveStep(_))));
        assert!(discretize_flat(-1.0).is_err());
        assert!(discretize_flat(f64::NAN).is_err());
    }

    #[test]
    fn constant_acceleration_step() {
        let dt = 0.02;
        let lti = discretize_flat(dt).unwrap();
        let mut z = StateVector::zeros();
        z[ACC] = 1.0;
        let next = lti.step(&z, &InputVector::zeros());
        assert_relative_eq!(next[POS], dt * dt / 2.0, epsilon = 1e-16);
        assert_relative_eq!(next[VEL], dt, epsilon = 1e-16);
    }

    #[test]
    fn figure8_values() {
        let gen = ReferenceGenerator::figure8(0.5).unwrap();
        let (s, _) = gen.evaluate(0.0);
        assert_relative_eq!(s.p, Vector3::zeros());
        assert_relative_eq!(s.v, Vector3::new(0.25, 0.0, 0.5), epsilon = 1e-15);
        let (s, _) = gen.evaluate(PI / 0.5);
        assert_relative_eq!(s.p, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn hover_is_constant() {
        let center = Vector3::new(1.0, -2.0, 0.5);
        let gen = ReferenceGenerator::hover(center);
        for t in [0.0, 1.3, 100.0] {
            let (s, u) = gen.evaluate(t);
            assert_eq!(s, FlatState::hover(center, 0.0));
            assert_eq!(u, FlatInput::zero());
        }
    }

    #[test]
    fn unknown_kind_rejected() {
        assert_eq!(
            "spiral".parse::<ReferenceKind>(),
            Err(Error::UnknownReference("spiral".into()))
        );
        assert_eq!("figure8".parse::<ReferenceKind>(), Ok(ReferenceKind::Figure8));
        assert!(ReferenceGenerator::new(ReferenceKind::Circle, 1.0, -0.1).is_err());
    }

    #[test]
    fn derivative_chain_by_finite_differences() {
        for kind in [ReferenceKind::Figure8, ReferenceKind::SinusoidX, ReferenceKind::Circle] {
            let gen = ReferenceGenerator::new(kind, 0.7, 1.3).unwrap();
            let h = 1e-4;
            for t in [0.0, 0.4, 2.1] {
                let (m, _) = gen.evaluate(t - h);
                let (c, u) = gen.evaluate(t);
                let (p, _) = gen.evaluate(t + h);
                assert_relative_eq!((p.p - m.p) / (2.0 * h), c.v, max_relative = 1e-7);
                assert_relative_eq!((p.v - m.v) / (2.0 * h), c.a, epsilon = 1e-7);
                assert_relative_eq!((p.a - m.a) / (2.0 * h), u.jerk, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn linear_terms() {
        let gen = ReferenceGenerator::hover(Vector3::zeros());
        let traj = ReferenceTrajectory::sample(gen, 0.0, 0.01, 20).unwrap();
        let cost = tracking_cost(&traj, 0, 10, &TrackingWeights::default()).unwrap();
        assert!(cost.linear.q.iter().all(|q| *q == StateVector::zeros()));

        let mut traj = traj;
        traj.states[3].p.x = 1.0;
        let w = TrackingWeights {
            q: StateMatrix::identity(),
            r: InputWeight::identity(),
            q_terminal: StateMatrix::identity(),
        };
        let cost = tracking_cost(&traj, 0, 10, &w).unwrap();
        assert_eq!(cost.linear.q[3], -StateVector::ith(0, 1.0));

        assert!(matches!(
            tracking_cost(&traj, 10, 10, &w),
            Err(Error::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn reference_minimizes_cost() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let gen = ReferenceGenerator::figure8(1.0).unwrap();
        let traj = ReferenceTrajectory::sample(gen, 0.0, 0.01, 12).unwrap();
        let cost = tracking_cost(&traj, 1, 10, &TrackingWeights::default()).unwrap();
        let zr: Vec<_> = traj.states[1..=11].iter().map(|s| s.to_vector()).collect();
        let vr: Vec<_> = traj.inputs[1..11].iter().map(|s| s.to_vector()).collect();
        let best = cost.evaluate(&zr, &vr);
        for _ in 0..200 {
            let z: Vec<_> = zr.iter().map(|z| z + StateVector::from_fn(|_, _| rng.gen_range(-0.1..0.1))).collect();
            let v: Vec<_> = vr.iter().map(|v| v + InputVector::from_fn(|_, _| rng.gen_range(-0.1..0.1))).collect();
            assert!(cost.evaluate(&z, &v) > best);
        }
    }

    #[test]
    fn gradient_vanishes_at_reference() {
        let w = TrackingWeights::default();
        let zr = StateVector::from_fn(|i, _| i as f64 * 0.3 - 1.0);
        let q = -(w.q * zr);
        assert_relative_eq!(w.q * zr + q, StateVector::zeros());
    }
}
