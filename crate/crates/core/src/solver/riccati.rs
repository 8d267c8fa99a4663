//! Finite-horizon discrete Riccati recursion.

use alloc::vec::Vec;

use crate::flat::{FlatLti, QuadCost};
use crate::{Error, GainMatrix, InputVector, InputWeight, Result, StateMatrix, StateVector};

/// Output of the backward recursion. `gains`, `feedforward` and `quu_inv`
/// have `N` entries; the cost-to-go terms have `N + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrSolution {
    pub gains: Vec<GainMatrix>,
    pub feedforward: Vec<InputVector>,
    pub cost_to_go: Vec<StateMatrix>,
    pub cost_to_go_linear: Vec<StateVector>,
    /// `(R + B'P_{k+1}B)^{-1}` per stage.
    pub quu_inv: Vec<InputWeight>,
}

impl LqrSolution {
    /// Closed-loop rollout `v_k = -K_k z_k - d_k` from `z0`.
    pub fn rollout(&self, lti: &FlatLti, z0: &StateVector) -> (Vec<StateVector>, Vec<InputVector>) {
        let n = self.gains.len();
        let mut states = Vec::with_capacity(n + 1);
        let mut inputs = Vec::with_capacity(n);
        states.push(*z0);
        for k in 0..n {
            let v = -(self.gains[k] * states[k]) - self.feedforward[k];
            states.push(lti.step(&states[k], &v));
            inputs.push(v);
        }
        (states, inputs)
    }
}

/// Quadratic part of the recursion: gains and cost-to-go matrices.
pub fn riccati_gains(
    lti: &FlatLti,
    q: &[StateMatrix],
    r: &InputWeight,
    q_terminal: &StateMatrix,
) -> Result<(Vec<GainMatrix>, Vec<StateMatrix>, Vec<InputWeight>)> {
    let n = q.len();
    if n == 0 {
        return Err(Error::EmptyHorizon);
    }
    let (a, b) = (&lti.a, &lti.b);
    let mut gains = alloc::vec![GainMatrix::zeros(); n];
    let mut quu_inv = alloc::vec![InputWeight::zeros(); n];
    let mut p = alloc::vec![StateMatrix::zeros(); n + 1];
    p[n] = *q_terminal;
    for k in (0..n).rev() {
        let pb = p[k + 1] * b;
        let quu = r + b.transpose() * pb;
        let inv = quu
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(Error::SingularInputHessian(k))?;
        let gain = inv * (pb.transpose() * a);
        let closed = a - b * gain;
        let next = q[k] + gain.transpose() * r * gain + closed.transpose() * p[k + 1] * closed;
        p[k] = 0.5 * (next + next.transpose());
        gains[k] = gain;
        quu_inv[k] = inv;
    }
    Ok((gains, p, quu_inv))
}

/// Linear part of the recursion with frozen gains. `q_lin` holds `q_0..q_N`
/// (the last entry is the terminal term). Writes `d_k` into `feedforward`
/// and `p_k` into `cost_to_go_linear`.
#[allow(clippy::too_many_arguments)]
pub fn riccati_linear(
    lti: &FlatLti,
    r: &InputWeight,
    gains: &[GainMatrix],
    cost_to_go: &[StateMatrix],
    quu_inv: &[InputWeight],
    q_lin: &[StateVector],
    r_lin: &[InputVector],
    feedforward: &mut [InputVector],
    cost_to_go_linear: &mut [StateVector],
) {
    let n = gains.len();
    let (a, b) = (&lti.a, &lti.b);
    cost_to_go_linear[n] = q_lin[n];
    for k in (0..n).rev() {
        let p_next = cost_to_go_linear[k + 1];
        let d = quu_inv[k] * (b.transpose() * p_next + r_lin[k]);
        let closed = a - b * gains[k];
        cost_to_go_linear[k] = q_lin[k]
            + closed.transpose() * (p_next - cost_to_go[k + 1] * (b * d))
            + gains[k].transpose() * (r * d - r_lin[k]);
        feedforward[k] = d;
    }
}

/// Full backward pass: `P_N = Q_f`, `p_N = q_f`, then `K, d, P, p` per stage.
pub fn lqr_backward(cost: &QuadCost, lti: &FlatLti) -> Result<LqrSolution> {
    let n = cost.horizon();
    let (gains, cost_to_go, quu_inv) = riccati_gains(lti, &cost.q, &cost.r, &cost.q_terminal)?;
    let mut feedforward = alloc::vec![InputVector::zeros(); n];
    let mut cost_to_go_linear = alloc::vec![StateVector::zeros(); n + 1];
    let mut q_lin = cost.linear.q.clone();
    q_lin.push(cost.linear.q_terminal);
    riccati_linear(
        lti,
        &cost.r,
        &gains,
        &cost_to_go,
        &quu_inv,
        &q_lin,
        &cost.linear.r,
        &mut feedforward,
        &mut cost_to_go_linear,
    );
    Ok(LqrSolution { gains, feedforward, cost_to_go, cost_to_go_linear, quu_inv })
}

/// Stationary solution of the discrete algebraic Riccati equation by
/// fixed-point iteration of the backward recursion.
pub fn dare(
    lti: &FlatLti,
    q: &StateMatrix,
    r: &InputWeight,
    tol: f64,
    max_iter: usize,
) -> Result<StateMatrix> {
    let (a, b) = (&lti.a, &lti.b);
    let mut p = *q;
    for _ in 0..max_iter {
        let pb = p * b;
        let quu = r + b.transpose() * pb;
        let inv = quu.cholesky().map(|c| c.inverse()).ok_or(Error::SingularInputHessian(0))?;
        let gain = inv * (pb.transpose() * a);
        let closed = a - b * gain;
        let next = q + gain.transpose() * r * gain + closed.transpose() * p * closed;
        let next = 0.5 * (next + next.transpose());
        let delta = (next - p).abs().max();
        p = next;
        if delta <= tol * (1.0 + p.abs().max()) {
            return Ok(p);
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat::{discretize_flat, LinearCost, TrackingWeights};
    use approx::assert_relative_eq;
    use nalgebra::{Matrix1, Matrix2, Vector2};

    #[test]
    fn zero_cost_gives_zero_policy() {
        let lti = discretize_flat(0.01).unwrap();
        let cost = QuadCost {
            q: alloc::vec![StateMatrix::zeros(); 5],
            r: InputWeight::identity(),
            q_terminal: StateMatrix::zeros(),
            linear: LinearCost::zeros(5),
        };
        let sol = lqr_backward(&cost, &lti).unwrap();
        assert!(sol.gains.iter().all(|k| k.abs().max() == 0.0));
        assert!(sol.feedforward.iter().all(|d| d.abs().max() == 0.0));
    }

    #[test]
    fn singular_input_weight_rejected() {
        let lti = discretize_flat(0.01).unwrap();
        let cost = QuadCost {
            q: alloc::vec![StateMatrix::zeros(); 2],
            r: InputWeight::zeros(),
            q_terminal: StateMatrix::zeros(),
            linear: LinearCost::zeros(2),
        };
        assert_eq!(lqr_backward(&cost, &lti), Err(Error::SingularInputHessian(1)));
    }

    /// Two-step dynamic programming for a scalar-input double integrator,
    /// written out by hand with 2x2 algebra.
    #[test]
    fn matches_hand_rolled_dp_on_double_integrator() {
        let dt = 0.1;
        let a = Matrix2::new(1.0, dt, 0.0, 1.0);
        let b = Vector2::new(0.5 * dt * dt, dt);
        let q = Matrix2::new(2.0, 0.3, 0.3, 1.0);
        let r = 0.5;
        let qf = Matrix2::new(4.0, 0.0, 0.0, 3.0);
        let (q0, q1, qf_lin) = (Vector2::new(0.2, -0.1), Vector2::new(-0.4, 0.3), Vector2::new(1.0, 0.5));
        let (r0, r1) = (0.1, -0.2);

        // stage 1: V2(z) = 1/2 z'Qf z + qf'z
        let h1 = r + (b.transpose() * qf * b)[0];
        let k1 = (b.transpose() * qf * a) / h1;
        let d1 = ((b.transpose() * qf_lin)[0] + r1) / h1;
        // V1(z) = 1/2 z'Qz + q1'z + min_u [...] with u = -k1 z - d1
        let cl1 = a - b * k1;
        let p1 = q + k1.transpose() * r * k1 + cl1.transpose() * qf * cl1;
        let p1_lin = q1 + cl1.transpose() * (qf_lin - qf * b * d1) + k1.transpose() * (r * d1 - r1);
        let h0 = r + (b.transpose() * p1 * b)[0];
        let k0 = (b.transpose() * p1 * a) / h0;
        let d0 = ((b.transpose() * p1_lin)[0] + r0) / h0;

        // brute-force check of stage-0 optimality for a sample state
        let z = Vector2::new(0.7, -0.3);
        let cost = |u0: f64, u1: f64| {
            let z1 = a * z + b * u0;
            let z2 = a * z1 + b * u1;
            0.5 * (z.transpose() * q * z)[0] + q0.dot(&z) + 0.5 * r * u0 * u0 + r0 * u0
                + 0.5 * (z1.transpose() * q * z1)[0] + q1.dot(&z1) + 0.5 * r * u1 * u1 + r1 * u1
                + 0.5 * (z2.transpose() * qf * z2)[0] + qf_lin.dot(&z2)
        };
        let u0 = -(k0 * z)[0] - d0;
        let z1 = a * z + b * u0;
        let u1 = -(k1 * z1)[0] - d1;
        let best = cost(u0, u1);
        for du in [-1e-3, 1e-3] {
            assert!(cost(u0 + du, u1) > best);
            assert!(cost(u0, u1 + du) > best);
        }

        // the same problem embedded in the flat model's x axis
        let mut lti = discretize_flat(dt).unwrap();
        lti.a = StateMatrix::identity();
        lti.b = crate::InputMatrix::zeros();
        lti.a[(0, 3)] = dt;
        lti.b[(0, 0)] = b[0];
        lti.b[(3, 0)] = b[1];
        let embed = |m: &Matrix2<f64>| {
            let mut out = StateMatrix::zeros();
            for (i, ii) in [0, 3].into_iter().enumerate() {
                for (j, jj) in [0, 3].into_iter().enumerate() {
                    out[(ii, jj)] = m[(i, j)];
                }
            }
            out
        };
        let embed_v = |v: &Vector2<f64>| {
            let mut out = StateVector::zeros();
            out[0] = v[0];
            out[3] = v[1];
            out
        };
        let cost = QuadCost {
            q: alloc::vec![embed(&q); 2],
            r: InputWeight::from_diagonal(&InputVector::new(r, 1.0, 1.0, 1.0)),
            q_terminal: embed(&qf),
            linear: LinearCost {
                q: alloc::vec![embed_v(&q0), embed_v(&q1)],
                r: alloc::vec![InputVector::new(r0, 0.0, 0.0, 0.0), InputVector::new(r1, 0.0, 0.0, 0.0)],
                q_terminal: embed_v(&qf_lin),
            },
        };
        let sol = lqr_backward(&cost, &lti).unwrap();
        assert_relative_eq!(sol.gains[0][(0, 0)], k0[0], epsilon = 1e-12);
        assert_relative_eq!(sol.gains[0][(0, 3)], k0[1], epsilon = 1e-12);
        assert_relative_eq!(sol.gains[1][(0, 0)], k1[0], epsilon = 1e-12);
        assert_relative_eq!(sol.feedforward[0][0], d0, epsilon = 1e-12);
        assert_relative_eq!(sol.feedforward[1][0], d1, epsilon = 1e-12);
        assert_relative_eq!(sol.cost_to_go[1][(0, 3)], p1[(0, 1)], epsilon = 1e-12);
        let _ = Matrix1::<f64>::zeros();
    }

    #[test]
    fn long_horizon_converges_to_dare() {
        let lti = discretize_flat(0.01).unwrap();
        let w = TrackingWeights::default();
        let p_inf = dare(&lti, &w.q, &w.r, 1e-13, 200_000).unwrap();
        // fixed point: one more backward step leaves it unchanged
        let (_, p, _) = riccati_gains(&lti, &[w.q], &w.r, &p_inf).unwrap();
        assert!((p[0] - p_inf).abs().max() < 1e-9 * p_inf.abs().max());

        let n = 4000;
        let (_, p, _) = riccati_gains(&lti, &alloc::vec![w.q; n], &w.r, &w.q).unwrap();
        assert!((p[0] - p[1]).abs().max() < 1e-9);
        assert!((p[0] - p_inf).abs().max() < 1e-6 * p_inf.abs().max());
    }
}
