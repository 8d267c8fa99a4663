use alloc::vec::Vec;

use nalgebra::SVector;

use super::plan::SolverPlan;
use super::riccati::riccati_linear;
use crate::conic::{project_halfspace, project_soc_in_place, SocVector, SOC_COUNT};
use crate::flat::LinearCost;
use crate::{Error, GammaVector, InputVector, Result, StateVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmSettings {
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self { tol_primal: 1e-4, tol_dual: 1e-4, max_iter: 50 }
    }
}

impl AdmmSettings {
    /// Budget for offline and regression solves.
    pub fn offline() -> Self {
        Self { max_iter: 500, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Diverged,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max-iters",
            Self::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// First input `v_0`.
    pub input: InputVector,
    /// Predicted `z_0..z_N`.
    pub states: Vec<StateVector>,
    pub inputs: Vec<InputVector>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: SolveStatus,
}

/// Iterates, slacks and duals of one solver instance. Per-stage constraint
/// arrays have `N + 1` entries; entry 0 is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmWorkspace {
    horizon: usize,
    pub states: Vec<StateVector>,
    pub inputs: Vec<InputVector>,
    pub gamma: Vec<GammaVector>,
    /// Cone slacks: `tau` bounds, `zeta` vectors.
    pub tau: Vec<GammaVector>,
    pub zeta: Vec<[SocVector; SOC_COUNT]>,
    /// Half-space slack pair `(rho_hat, sigma_hat)`.
    pub half_lhs: Vec<f64>,
    pub half_rhs: Vec<f64>,
    pub lambda: Vec<[SocVector; SOC_COUNT]>,
    pub lambda_tau: Vec<GammaVector>,
    pub mu: Vec<SVector<f64, 5>>,
    pub nu: Vec<f64>,
    pub big_lambda: Vec<f64>,
    pub feedforward: Vec<InputVector>,
    pub cost_to_go_linear: Vec<StateVector>,
    q_lin: Vec<StateVector>,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

fn shift_left<T: Copy>(v: &mut [T], from: usize) {
    if v.len() > from + 1 {
        v.copy_within(from + 1.., from);
    }
}

impl AdmmWorkspace {
    pub fn new(horizon: usize) -> Self {
        let n1 = horizon + 1;
        Self {
            horizon,
            states: alloc::vec![StateVector::zeros(); n1],
            inputs: alloc::vec![InputVector::zeros(); horizon],
            gamma: alloc::vec![GammaVector::zeros(); n1],
            tau: alloc::vec![GammaVector::zeros(); n1],
            zeta: alloc::vec![[SocVector::zeros(); SOC_COUNT]; n1],
            half_lhs: alloc::vec![0.0; n1],
            half_rhs: alloc::vec![0.0; n1],
            lambda: alloc::vec![[SocVector::zeros(); SOC_COUNT]; n1],
            lambda_tau: alloc::vec![GammaVector::zeros(); n1],
            mu: alloc::vec![SVector::zeros(); n1],
            nu: alloc::vec![0.0; n1],
            big_lambda: alloc::vec![0.0; n1],
            feedforward: alloc::vec![InputVector::zeros(); horizon],
            cost_to_go_linear: alloc::vec![StateVector::zeros(); n1],
            q_lin: alloc::vec![StateVector::zeros(); n1],
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Cold start.
    pub fn reset(&mut self) {
        *self = Self::new(self.horizon);
    }

    /// Advance every stage by one step for a receding-horizon warm start;
    /// the last stage is duplicated.
    pub fn shift(&mut self) {
        shift_left(&mut self.states, 0);
        shift_left(&mut self.inputs, 0);
        // stage 0 carries no constraints
        shift_left(&mut self.gamma, 1);
        shift_left(&mut self.tau, 1);
        shift_left(&mut self.zeta, 1);
        shift_left(&mut self.half_lhs, 1);
        shift_left(&mut self.half_rhs, 1);
        shift_left(&mut self.lambda, 1);
        shift_left(&mut self.lambda_tau, 1);
        shift_left(&mut self.mu, 1);
        shift_left(&mut self.nu, 1);
        shift_left(&mut self.big_lambda, 1);
    }

    fn is_finite(&self) -> bool {
        self.states.iter().all(|z| z.iter().all(|x| x.is_finite()))
            && self.inputs.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.gamma.iter().all(|g| g.iter().all(|x| x.is_finite()))
    }
}

/// Assemble `q_tilde`, run the backward pass for `d, p` with the frozen
/// gains, roll out from `z0`, then update `gamma`.
pub fn primal_update(plan: &SolverPlan, ws: &mut AdmmWorkspace, z0: &StateVector, linear: &LinearCost) {
    let n = plan.horizon();
    let rho = plan.rho;
    for k in 0..=n {
        let mut q = if k < n { linear.q[k] } else { linear.q_terminal };
        if k > 0 {
            let st = &plan.stages[k];
            for (j, soc) in st.socs.iter().enumerate() {
                if soc.rows > 0 {
                    q += soc.f.transpose() * (ws.lambda[k][j] + (soc.g - ws.zeta[k][j]) * rho);
                }
            }
            q += st.s.transpose() * (ws.big_lambda[k] + rho * (st.w - ws.half_rhs[k]));
        }
        ws.q_lin[k] = q;
    }
    riccati_linear(
        &plan.lti,
        &plan.r,
        &plan.gains,
        &plan.cost_to_go,
        &plan.quu_inv,
        &ws.q_lin,
        &linear.r,
        &mut ws.feedforward,
        &mut ws.cost_to_go_linear,
    );
    ws.states[0] = *z0;
    for k in 0..n {
        let v = -(plan.gains[k] * ws.states[k]) - ws.feedforward[k];
        ws.inputs[k] = v;
        ws.states[k + 1] = plan.lti.step(&ws.states[k], &v);
    }
    let chol = plan.gamma_chol();
    for k in 1..=n {
        let st = &plan.stages[k];
        let rhs = ws.tau[k] * rho - ws.lambda_tau[k]
            + st.c.transpose() * (st.d * rho - ws.mu[k])
            + st.t.transpose() * (rho * ws.half_lhs[k] - ws.nu[k]);
        ws.gamma[k] = chol.solve(&rhs) / rho;
    }
}

/// Project onto the cones and the half-space. Returns the scaled dual
/// residual `rho * max |slack change|`.
pub fn slack_update(plan: &SolverPlan, ws: &mut AdmmWorkspace) -> f64 {
    let n = plan.horizon();
    let rho = plan.rho;
    let mut change: f64 = 0.0;
    for k in 1..=n {
        let st = &plan.stages[k];
        let z = ws.states[k];
        for (j, soc) in st.socs.iter().enumerate() {
            let mut v = soc.lhs(&z) + ws.lambda[k][j] / rho;
            let s = ws.gamma[k][j] + ws.lambda_tau[k][j] / rho;
            let t = project_soc_in_place(s, &mut v.as_mut_slice()[..soc.rows]);
            change = change.max((t - ws.tau[k][j]).abs()).max((v - ws.zeta[k][j]).amax());
            ws.tau[k][j] = t;
            ws.zeta[k][j] = v;
        }
        let a = (st.t * ws.gamma[k])[0] + ws.nu[k] / rho;
        let b = (st.s * z)[0] + st.w + ws.big_lambda[k] / rho;
        let (pa, pb) = project_halfspace(a, b);
        change = change.max((pa - ws.half_lhs[k]).abs()).max((pb - ws.half_rhs[k]).abs());
        ws.half_lhs[k] = pa;
        ws.half_rhs[k] = pb;
    }
    ws.dual_residual = rho * change;
    ws.dual_residual
}

/// Gradient ascent on every multiplier family. Returns the primal residual
/// (largest constraint mismatch before the step).
pub fn dual_update(plan: &SolverPlan, ws: &mut AdmmWorkspace) -> f64 {
    let n = plan.horizon();
    let rho = plan.rho;
    let mut res: f64 = 0.0;
    for k in 1..=n {
        let st = &plan.stages[k];
        let z = ws.states[k];
        let g = ws.gamma[k];
        for (j, soc) in st.socs.iter().enumerate() {
            let r = soc.lhs(&z) - ws.zeta[k][j];
            res = res.max(r.amax());
            ws.lambda[k][j] += r * rho;
        }
        let r_tau = g - ws.tau[k];
        let r_eq = st.c * g - st.d;
        let r_lhs = (st.t * g)[0] - ws.half_lhs[k];
        let r_rhs = (st.s * z)[0] + st.w - ws.half_rhs[k];
        res = res.max(r_tau.amax()).max(r_eq.amax()).max(r_lhs.abs()).max(r_rhs.abs());
        ws.lambda_tau[k] += r_tau * rho;
        ws.mu[k] += r_eq * rho;
        ws.nu[k] += rho * r_lhs;
        ws.big_lambda[k] += rho * r_rhs;
    }
    ws.primal_residual = res;
    res
}

/// Run ADMM from the current contents of `ws` (warm start if it holds a
/// previous, shifted solution).
pub fn solve(
    plan: &SolverPlan,
    ws: &mut AdmmWorkspace,
    z0: &StateVector,
    linear: &LinearCost,
    settings: &AdmmSettings,
) -> Result<SolveResult> {
    let n = plan.horizon();
    if ws.horizon != n || linear.horizon() != n {
        return Err(Error::InvalidParameter("workspace, plan and cost horizons differ"));
    }
    if !(plan.rho > 0.0) {
        return Err(Error::InvalidParameter("rho must be positive"));
    }
    if z0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState(z0.amax()));
    }
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    for it in 1..=settings.max_iter {
        iterations = it;
        primal_update(plan, ws, z0, linear);
        if !ws.is_finite() {
            status = SolveStatus::Diverged;
            break;
        }
        let dual = slack_update(plan, ws);
        let primal = dual_update(plan, ws);
        log::trace!("admm iter {it}: primal {primal:.3e} dual {dual:.3e}");
        if !(primal.is_finite() && dual.is_finite()) {
            status = SolveStatus::Diverged;
            break;
        }
        if primal < settings.tol_primal && dual < settings.tol_dual {
            status = SolveStatus::Converged;
            break;
        }
    }
    Ok(SolveResult {
        input: ws.inputs[0],
        states: ws.states.clone(),
        inputs: ws.inputs.clone(),
        iterations,
        primal_residual: ws.primal_residual,
        dual_residual: ws.dual_residual,
        status,
    })
}
