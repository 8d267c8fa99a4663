#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

use crate::{Error, Result, StateMatrix, StateVector};

/// Squared-exponential kernel hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeKernelParams {
    /// Prior (signal) variance, (m/s²)².
    pub signal_var: f64,
    /// Observation noise variance, (m/s²)². Only enters the training
    /// diagonal.
    pub noise_var: f64,
    /// Diagonal of `M`, one length scale per flat-state entry.
    pub length_scales: StateVector,
}

impl Default for SeKernelParams {
    fn default() -> Self {
        let mut length_scales = StateVector::from_element(10.0);
        length_scales.fixed_rows_mut::<3>(crate::flat::VEL).fill(1.0);
        Self { signal_var: 1.0, noise_var: 0.01, length_scales }
    }
}

impl SeKernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.signal_var > 0.0) || !self.signal_var.is_finite() {
            return Err(Error::InvalidParameter("signal variance must be positive"));
        }
        if !(self.noise_var >= 0.0) || !self.noise_var.is_finite() {
            return Err(Error::InvalidParameter("noise variance must be non-negative"));
        }
        if self.length_scales.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter("length scales must be positive"));
        }
        Ok(())
    }

    /// `M^-2` as a vector.
    pub fn inv_sq_scales(&self) -> StateVector {
        self.length_scales.map(|l| 1.0 / (l * l))
    }
}

/// `sigma_eta^2 exp(-1/2 (z - z')' M^-2 (z - z'))`.
pub fn kernel(z: &StateVector, zp: &StateVector, params: &SeKernelParams) -> f64 {
    let w = params.inv_sq_scales();
    let r2: f64 = (z - zp).iter().zip(w.iter()).map(|(d, w)| d * d * w).sum();
    params.signal_var * (-0.5 * r2).exp()
}

/// `K^(1,0)`: gradient in the first argument, `-M^-2 (z - z') k`.
pub fn kernel_grad1(z: &StateVector, zp: &StateVector, params: &SeKernelParams) -> StateVector {
    let k = kernel(z, zp, params);
    -(params.inv_sq_scales().component_mul(&(z - zp))) * k
}

/// `K^(0,1)`: gradient in the second argument, `+M^-2 (z - z') k`.
pub fn kernel_grad2(z: &StateVector, zp: &StateVector, params: &SeKernelParams) -> StateVector {
    -kernel_grad1(z, zp, params)
}

/// `K^(1,1)`: mixed second derivative `d²k / dz_i dz'_j`,
/// `(M^-2 - M^-2 (z - z')(z - z')' M^-2) k`.
pub fn kernel_hess(z: &StateVector, zp: &StateVector, params: &SeKernelParams) -> StateMatrix {
    let k = kernel(z, zp, params);
    let w = params.inv_sq_scales();
    let u = w.component_mul(&(z - zp));
    (StateMatrix::from_diagonal(&w) - u * u.transpose()) * k
}
