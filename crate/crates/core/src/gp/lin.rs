use nalgebra::{DMatrix, SMatrix};

use super::kernel::{kernel, kernel_grad1, SeKernelParams};
use super::model::{GpAxisModel, GpModel};
use crate::{AugMatrix, AugVector, Error, Result, StateVector, Vector3, AUG_DIM};

/// Jitter added to the repaired covariance before factorization.
pub const PSD_JITTER: f64 = 1e-12;

/// First-order expansion of one axis about `z_ref`:
/// mean `mu_bar' zbar`, variance `zbar' V_bar zbar`, `zbar = [1, z - z_ref]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinGpAxis {
    pub mean_coef: AugVector,
    pub cov: AugMatrix,
    /// Lower-triangular `L_bar` with `L_bar L_bar' = cov`.
    pub chol: AugMatrix,
}

impl LinGpAxis {
    pub fn zero() -> Self {
        Self { mean_coef: AugVector::zeros(), cov: AugMatrix::zeros(), chol: AugMatrix::zeros() }
    }
}

/// Linearized disturbance model for one horizon stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinGpStage {
    pub z_ref: StateVector,
    pub axes: [LinGpAxis; 3],
}

impl LinGpStage {
    /// No learned disturbance: zero mean, zero variance.
    pub fn zero(z_ref: StateVector) -> Self {
        Self { z_ref, axes: [LinGpAxis::zero(); 3] }
    }

    pub fn augment(&self, z: &StateVector) -> AugVector {
        let mut zbar = AugVector::zeros();
        zbar[0] = 1.0;
        zbar.fixed_rows_mut::<10>(1).copy_from(&(z - self.z_ref));
        zbar
    }

    pub fn mean(&self, z: &StateVector) -> Vector3 {
        let zbar = self.augment(z);
        Vector3::from_fn(|i, _| self.axes[i].mean_coef.dot(&zbar))
    }

    pub fn variance(&self, z: &StateVector) -> Vector3 {
        let zbar = self.augment(z);
        Vector3::from_fn(|i, _| zbar.dot(&(self.axes[i].cov * zbar)))
    }

    /// `d mu / dz`, constant for the affine mean.
    pub fn mean_jacobian(&self) -> SMatrix<f64, 3, 10> {
        SMatrix::<f64, 3, 10>::from_fn(|i, j| self.axes[i].mean_coef[j + 1])
    }
}

fn prior_block(z_ref: &StateVector, params: &SeKernelParams) -> AugMatrix {
    // k(z,z) and K^(1,1)(z,z); the cross terms K^(1,0)(z,z) vanish for SE.
    let mut block = AugMatrix::zeros();
    block[(0, 0)] = kernel(z_ref, z_ref, params);
    let w = params.inv_sq_scales();
    for i in 0..10 {
        block[(i + 1, i + 1)] = w[i] * params.signal_var;
    }
    block
}

/// Symmetrize, clip negative eigenvalues, add jitter.
fn repair_psd(v: &AugMatrix) -> AugMatrix {
    let sym = 0.5 * (v + v.transpose());
    let mut eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|l| *l < 0.0) {
        eig.eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
        let r = eig.recompose();
        0.5 * (r + r.transpose()) + AugMatrix::identity() * PSD_JITTER
    } else {
        sym + AugMatrix::identity() * PSD_JITTER
    }
}

fn linearize_axis(axis: &GpAxisModel, z_ref: &StateVector) -> Result<LinGpAxis> {
    let params = &axis.params;
    let n = axis.len();
    let mut cov = prior_block(z_ref, params);
    let mut mean_coef = AugVector::zeros();
    if n > 0 {
        // G' columns: [k(z_ref, z_i); K^(1,0)(z_ref, z_i)]
        let mut gt = DMatrix::<f64>::zeros(n, AUG_DIM);
        for (i, zi) in axis.inputs.iter().enumerate() {
            gt[(i, 0)] = kernel(z_ref, zi, params);
            let grad = kernel_grad1(z_ref, zi, params);
            for j in 0..10 {
                gt[(i, j + 1)] = grad[j];
            }
        }
        let mc = gt.transpose() * axis.alpha();
        mean_coef.copy_from(&mc);
        let w = axis.whiten(gt);
        let reduction = w.transpose() * w;
        for i in 0..AUG_DIM {
            for j in 0..AUG_DIM {
                cov[(i, j)] -= reduction[(i, j)];
            }
        }
    }
    let cov = repair_psd(&cov);
    let chol = cov.cholesky().ok_or(Error::CovarianceFactorization)?.l();
    Ok(LinGpAxis { mean_coef, cov, chol })
}

/// Linearize all three axes of `model` about `z_ref`.
pub fn linearize(model: &GpModel, z_ref: &StateVector) -> Result<LinGpStage> {
    Ok(LinGpStage {
        z_ref: *z_ref,
        axes: [
            linearize_axis(&model.axes[0], z_ref)?,
            linearize_axis(&model.axes[1], z_ref)?,
            linearize_axis(&model.axes[2], z_ref)?,
        ],
    })
}

/// Mean-only expansion about `z_ref` (zero covariance): enough for the
/// thrust map, without the `O(n^2)` covariance work.
pub fn linearize_mean(model: &GpModel, z_ref: &StateVector) -> LinGpStage {
    let mut stage = LinGpStage::zero(*z_ref);
    for (axis, lin) in model.axes.iter().zip(stage.axes.iter_mut()) {
        for (zi, a) in axis.inputs.iter().zip(axis.alpha().iter()) {
            lin.mean_coef[0] += kernel(z_ref, zi, &axis.params) * a;
            let grad = kernel_grad1(z_ref, zi, &axis.params) * *a;
            for j in 0..10 {
                lin.mean_coef[j + 1] += grad[j];
            }
        }
    }
    stage
}
