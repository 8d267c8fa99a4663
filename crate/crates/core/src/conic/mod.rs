//! Quantile functions, cone and half-space projections, and compilation of
//! probabilistic thrust constraints into per-stage conic data.

mod constraints;
mod project;
mod quantile;

pub use constraints::{
    build_stage_constraints, ConstraintConfig, ConstraintWarnings, SocConstraint, SocVector,
    StageConstraintSet, SOC_COUNT, SOC_ROWS,
};
pub use project::{project_halfspace, project_soc, project_soc_in_place};
pub use quantile::{chi2_3dof_cdf, chi2_3dof_sf, chi2_quantile_3dof, normal_cdf, normal_quantile};
