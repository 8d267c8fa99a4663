use core::f64::consts::FRAC_PI_2;

use nalgebra::{SMatrix, SVector};
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

use super::quantile::{chi2_quantile_3dof, normal_quantile};
use crate::flat::ACC;
use crate::gp::LinGpStage;
use crate::{Error, GammaVector, Result, StateVector, GRAVITY, GAMMA_DIM};

/// Storage rows of every SOC; unused rows stay zero.
pub const SOC_ROWS: usize = 11;
/// SOC slots per stage, one per `gamma_j`. Slot 7 is the trivial cone.
pub const SOC_COUNT: usize = GAMMA_DIM;

pub type SocVector = SVector<f64, SOC_ROWS>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintConfig {
    /// Maximum mass-normalized collective thrust, m/s².
    pub c_max: f64,
    /// Maximum tilt, rad.
    pub theta_max: f64,
    pub p_ball: f64,
    pub p_cone: f64,
    /// Bound the vertical thrust by the disturbance mean alone instead of
    /// `a_z + g - mu_z`.
    pub mean_only_cone: bool,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self {
            c_max: 20.0,
            theta_max: core::f64::consts::FRAC_PI_4,
            p_ball: 0.95,
            p_cone: 0.95,
            mean_only_cone: false,
        }
    }
}

impl ConstraintConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_max > GRAVITY) || !self.c_max.is_finite() {
            return Err(Error::InvalidParameter("c_max must exceed gravity"));
        }
        if !(self.theta_max > 0.0 && self.theta_max < FRAC_PI_2) {
            return Err(Error::InvalidParameter("theta_max must lie in (0, pi/2)"));
        }
        for p in [self.p_ball, self.p_cone] {
            if !(p > 0.5 && p < 1.0) {
                return Err(Error::InvalidParameter("constraint probabilities must lie in (0.5, 1)"));
            }
        }
        Ok(())
    }

    pub fn chi_ball(&self) -> Result<f64> {
        Ok(chi2_quantile_3dof(self.p_ball)?.sqrt())
    }

    pub fn chi_cone(&self) -> Result<f64> {
        Ok(chi2_quantile_3dof(self.p_cone)?.sqrt())
    }

    pub fn phi_inv(&self) -> Result<f64> {
        normal_quantile(self.p_cone)
    }
}

/// `||F z + g|| <= gamma_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocConstraint {
    pub f: SMatrix<f64, SOC_ROWS, 10>,
    pub g: SocVector,
    pub gamma_index: usize,
    pub rows: usize,
}

impl SocConstraint {
    fn empty(gamma_index: usize) -> Self {
        Self { f: SMatrix::zeros(), g: SocVector::zeros(), gamma_index, rows: 0 }
    }

    pub fn lhs(&self, z: &StateVector) -> SocVector {
        self.f * z + self.g
    }

    pub fn norm(&self, z: &StateVector) -> f64 {
        self.lhs(z).norm()
    }
}

/// Vacuous or reference-infeasible configurations. Reported, never fatal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConstraintWarnings {
    /// `c_max <= chi_b * sigma` on some axis at the reference: no thrust is admissible.
    pub ball_vacuous: bool,
    /// The tightened vertical thrust bound is non-positive at the reference.
    pub cone_vacuous: bool,
    /// The reference itself violates the tightened ball.
    pub reference_outside_ball: bool,
}

impl ConstraintWarnings {
    pub fn any(&self) -> bool {
        self.ball_vacuous || self.cone_vacuous || self.reference_outside_ball
    }
}

/// Conic data of one horizon stage:
/// `||F_j z + g_j|| <= gamma_j`, `C gamma = d`, `T gamma <= S z + w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageConstraintSet {
    pub socs: [SocConstraint; SOC_COUNT],
    pub c: SMatrix<f64, 5, GAMMA_DIM>,
    pub d: SVector<f64, 5>,
    pub t: SMatrix<f64, 1, GAMMA_DIM>,
    pub s: SMatrix<f64, 1, 10>,
    pub w: f64,
    pub chi_ball: f64,
    pub chi_cone: f64,
    pub phi_inv: f64,
    pub warnings: ConstraintWarnings,
}

fn coupling(cfg: &ConstraintConfig, chi_ball: f64, chi_cone: f64, phi_inv: f64) -> (SMatrix<f64, 5, 9>, SVector<f64, 5>, SMatrix<f64, 1, 9>) {
    let mut c = SMatrix::<f64, 5, 9>::zeros();
    for i in 0..3 {
        c[(i, i)] = 1.0;
        c[(i, i + 3)] = chi_ball;
    }
    // gamma_8 - gamma_7 + chi_c gamma_4 = 0, gamma_9 - gamma_7 + chi_c gamma_5 = 0
    for (row, (slack, var)) in [(7, 3), (8, 4)].into_iter().enumerate() {
        c[(3 + row, slack)] = 1.0;
        c[(3 + row, 6)] = -1.0;
        c[(3 + row, var)] = chi_cone;
    }
    let d = SVector::<f64, 5>::new(cfg.c_max, cfg.c_max, cfg.c_max, 0.0, 0.0);
    let mut t = SMatrix::<f64, 1, 9>::zeros();
    t[5] = 1.0;
    t[6] = 1.0 / (cfg.theta_max.tan() * phi_inv);
    (c, d, t)
}

impl StageConstraintSet {
    /// Stage with every constraint switched off: `F = 0`, `g = 0`, `S = 0`,
    /// `w = 1`. Feasible with `gamma = 0` except the equality rows, which
    /// `gamma_1..3 = c_max` satisfy.
    pub fn inactive(cfg: &ConstraintConfig) -> Result<Self> {
        cfg.validate()?;
        let (chi_ball, chi_cone, phi_inv) = (cfg.chi_ball()?, cfg.chi_cone()?, cfg.phi_inv()?);
        let (c, d, t) = coupling(cfg, chi_ball, chi_cone, phi_inv);
        Ok(Self {
            socs: core::array::from_fn(SocConstraint::empty),
            c,
            d,
            t,
            s: SMatrix::zeros(),
            w: 1.0,
            chi_ball,
            chi_cone,
            phi_inv,
            warnings: ConstraintWarnings::default(),
        })
    }

    /// Largest violation of the stage constraints at `(z, gamma)`.
    pub fn max_violation(&self, z: &StateVector, gamma: &GammaVector) -> f64 {
        let soc = self.socs.iter().map(|s| s.norm(z) - gamma[s.gamma_index]).fold(0.0, f64::max);
        let eq = (self.c * gamma - self.d).amax();
        let half = ((self.t * gamma)[0] - (self.s * z)[0] - self.w).max(0.0);
        soc.max(eq).max(half)
    }

    /// Tightened thrust budget of the ball: `c_max - chi_b * max_j ||F_{3+j} z + g_{3+j}||`.
    /// Non-positive when no thrust vector is admissible.
    pub fn ball_radius(&self, z: &StateVector) -> f64 {
        let sigma = (3..6).map(|j| self.socs[j].norm(z)).fold(0.0, f64::max);
        self.d[0] - self.chi_ball * sigma
    }

    /// Smallest `gamma` with all SOCs tight, completed through `C`;
    /// `None` if that completion is infeasible.
    pub fn tight_gamma(&self, z: &StateVector) -> Option<GammaVector> {
        let n = |j: usize| self.socs[j].norm(z);
        let mut g = GammaVector::zeros();
        for i in 0..3 {
            g[i + 3] = n(i + 3);
            g[i] = self.d[i] - self.chi_ball * g[i + 3];
        }
        g[6] = (n(7) + self.chi_cone * g[3]).max(n(8) + self.chi_cone * g[4]);
        g[7] = g[6] - self.chi_cone * g[3];
        g[8] = g[6] - self.chi_cone * g[4];
        (self.max_violation(z, &g) <= 1e-9).then_some(g)
    }
}

/// Compile the chance constraints of one stage, linearized about `z_ref`.
pub fn build_stage_constraints(lin: &LinGpStage, z_ref: &StateVector, cfg: &ConstraintConfig) -> Result<StageConstraintSet> {
    let mut set = StageConstraintSet::inactive(cfg)?;
    // mu(z) = mu0 + J z
    let jac = lin.mean_jacobian();
    let mu0 = lin.mean(&StateVector::zeros());

    // a + g e_z - mu(z)
    let mut ball_f = SMatrix::<f64, 3, 10>::zeros();
    for i in 0..3 {
        ball_f[(i, ACC + i)] = 1.0;
    }
    ball_f -= jac;
    let mut ball_g = -mu0;
    ball_g[2] += GRAVITY;

    for j in 0..3 {
        let soc = &mut set.socs[j];
        soc.f.fixed_view_mut::<3, 10>(0, 0).copy_from(&ball_f);
        soc.g.fixed_rows_mut::<3>(0).copy_from(&ball_g);
        soc.rows = 3;
    }
    // ||L' [1, z - z_lin]||: F = L'[:, 1..], g = L'[:, 0] - L'[:, 1..] z_lin
    for axis in 0..3 {
        let lt = lin.axes[axis].chol.transpose();
        let lz = lt.fixed_view::<11, 10>(0, 1).into_owned();
        let soc = &mut set.socs[3 + axis];
        soc.f = lz;
        soc.g = lt.column(0) - lz * lin.z_ref;
        soc.rows = SOC_ROWS;
    }
    // x/y rows of a - mu(z)
    for j in 7..9 {
        let soc = &mut set.socs[j];
        soc.f.fixed_view_mut::<2, 10>(0, 0).copy_from(&ball_f.fixed_rows::<2>(0));
        soc.g.fixed_rows_mut::<2>(0).copy_from(&mu0.fixed_rows::<2>(0).map(|m| -m));
        soc.rows = 2;
    }
    // T gamma <= (c_z mean) / phi_inv
    let (s_row, w0) = if cfg.mean_only_cone {
        (jac.row(2).into_owned(), mu0[2])
    } else {
        (ball_f.row(2).into_owned(), ball_g[2])
    };
    set.s = s_row / set.phi_inv;
    set.w = w0 / set.phi_inv;

    let sigma = lin.variance(z_ref).map(|v| v.max(0.0).sqrt());
    let c_mean = ball_f * z_ref + ball_g;
    let radius = cfg.c_max - set.chi_ball * sigma.max();
    set.warnings = ConstraintWarnings {
        ball_vacuous: radius <= 0.0,
        cone_vacuous: c_mean[2] - set.phi_inv * sigma[2] <= 0.0,
        reference_outside_ball: c_mean.norm() > radius,
    };
    Ok(set)
}
