//! Two-rate ADMM solver for the LQR-structured SOCP.
//!
//! [`precompute`] runs at the low rate: it compiles per-stage constraints,
//! modifies the stage costs by the penalty `rho` and freezes the Riccati
//! gains. [`solve`] runs at the high rate against an immutable
//! [`SolverPlan`] and a mutable [`AdmmWorkspace`].

mod admm;
mod plan;
pub mod riccati;

pub use admm::{
    dual_update, primal_update, slack_update, solve, AdmmSettings, AdmmWorkspace, SolveResult,
    SolveStatus,
};
pub use plan::{precompute, SolverPlan};
pub use riccati::{dare, lqr_backward, LqrSolution};
