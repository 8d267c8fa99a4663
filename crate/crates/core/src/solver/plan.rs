use alloc::vec::Vec;

use nalgebra::{Cholesky, SMatrix, U9};

use super::riccati::riccati_gains;
use crate::conic::{build_stage_constraints, ConstraintConfig, StageConstraintSet};
use crate::flat::{FlatLti, QuadCost};
use crate::gp::LinGpStage;
use crate::{Error, GainMatrix, InputWeight, Result, StateMatrix, StateVector, GAMMA_DIM};

/// Immutable low-rate snapshot. Stage `k` in `0..=N` constrains `z_k`;
/// stage 0 is always inactive.
#[derive(Debug, Clone)]
pub struct SolverPlan {
    pub lti: FlatLti,
    pub rho: f64,
    pub q: Vec<StateMatrix>,
    pub q_terminal: StateMatrix,
    pub r: InputWeight,
    /// `N + 1` penalty-modified weights; the last one replaces `Q_f`.
    pub q_tilde: Vec<StateMatrix>,
    pub gains: Vec<GainMatrix>,
    pub cost_to_go: Vec<StateMatrix>,
    pub quu_inv: Vec<InputWeight>,
    pub stages: Vec<StageConstraintSet>,
    /// Linearizations used to build `stages`, kept for the command map.
    pub lin: Vec<LinGpStage>,
    gamma_chol: Cholesky<f64, U9>,
}

impl SolverPlan {
    /// Build from explicit stage sets (`N + 1` entries, entry 0 ignored).
    pub fn from_stages(
        lti: &FlatLti,
        mut stages: Vec<StageConstraintSet>,
        lin: Vec<LinGpStage>,
        cost: &QuadCost,
        cfg: &ConstraintConfig,
        rho: f64,
    ) -> Result<Self> {
        let n = cost.horizon();
        if n == 0 {
            return Err(Error::EmptyHorizon);
        }
        if stages.len() != n + 1 {
            return Err(Error::InvalidParameter("need one constraint set per stage 0..=N"));
        }
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter("rho must be non-negative"));
        }
        stages[0] = StageConstraintSet::inactive(cfg)?;
        let q_tilde: Vec<StateMatrix> = (0..=n)
            .map(|k| {
                let base = if k < n { cost.q[k] } else { cost.q_terminal };
                let st = &stages[k];
                let mut pen = st.s.transpose() * st.s;
                for soc in &st.socs {
                    pen += soc.f.transpose() * soc.f;
                }
                base + pen * rho
            })
            .collect();
        let (gains, cost_to_go, quu_inv) = riccati_gains(lti, &q_tilde[..n], &cost.r, &q_tilde[n])?;
        // I + C'C + T'T; C and T depend only on the config. The solver
        // divides by rho.
        let (c, t) = (stages[n].c, stages[n].t);
        let sys = SMatrix::<f64, GAMMA_DIM, GAMMA_DIM>::identity() + c.transpose() * c + t.transpose() * t;
        let gamma_chol = sys.cholesky().ok_or(Error::GammaFactorization)?;
        Ok(Self {
            lti: *lti,
            rho,
            q: cost.q.clone(),
            q_terminal: cost.q_terminal,
            r: cost.r,
            q_tilde,
            gains,
            cost_to_go,
            quu_inv,
            stages,
            lin,
            gamma_chol,
        })
    }

    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    pub(crate) fn gamma_chol(&self) -> &Cholesky<f64, U9> {
        &self.gamma_chol
    }

    /// Number of stages whose compiled constraints raised a warning.
    pub fn warning_count(&self) -> usize {
        self.stages.iter().filter(|s| s.warnings.any()).count()
    }
}

/// Low-rate plan build. `lin[k]` and `reference[k]` describe stage `k` for
/// `k in 0..=N`.
pub fn precompute(
    lti: &FlatLti,
    lin: &[LinGpStage],
    reference: &[StateVector],
    cost: &QuadCost,
    cfg: &ConstraintConfig,
    rho: f64,
) -> Result<SolverPlan> {
    let n = cost.horizon();
    if lin.len() < n + 1 || reference.len() < n + 1 {
        return Err(Error::InvalidParameter("linearization window shorter than the horizon"));
    }
    let mut stages = Vec::with_capacity(n + 1);
    stages.push(StageConstraintSet::inactive(cfg)?);
    for k in 1..=n {
        stages.push(build_stage_constraints(&lin[k], &reference[k], cfg)?);
    }
    SolverPlan::from_stages(lti, stages, lin[..=n].to_vec(), cost, cfg, rho)
}
