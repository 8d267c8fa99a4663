//! Gaussian-process regression of the aerodynamic disturbance, one
//! independent GP per world axis, and its linearization about a reference
//! flat state.

mod hyper;
mod kernel;
mod lin;
mod model;

pub use hyper::{grid_search, log_marginal_likelihood};
pub use kernel::{kernel, kernel_grad1, kernel_grad2, kernel_hess, SeKernelParams};
pub use lin::{linearize, linearize_mean, LinGpAxis, LinGpStage, PSD_JITTER};
pub use model::{GpAxisModel, GpDataset, GpModel, Prediction, KERNEL_JITTER};
