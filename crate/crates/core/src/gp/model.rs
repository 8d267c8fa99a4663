use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::{kernel, SeKernelParams};
use crate::{Error, Result, StateVector, Vector3};

/// One dataset, three disturbance targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GpDataset {
    pub inputs: Vec<StateVector>,
    pub targets: Vec<Vector3>,
}

impl GpDataset {
    pub fn new(inputs: Vec<StateVector>, targets: Vec<Vector3>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::InvalidParameter("inputs and targets differ in length"));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, z: StateVector, d: Vector3) {
        self.inputs.push(z);
        self.targets.push(d);
    }

    pub fn axis_targets(&self, axis: usize) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.targets.iter().map(|d| d[axis]))
    }
}

/// Posterior mean and variance of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub var: f64,
}

/// Diagonal jitter added when the noise variance is zero.
pub const KERNEL_JITTER: f64 = 1e-10;

/// GP for one disturbance component. The kernel factorization and
/// `K^{-1} D` are cached at fit time.
#[derive(Debug, Clone)]
pub struct GpAxisModel {
    pub params: SeKernelParams,
    pub inputs: Arc<[StateVector]>,
    pub targets: DVector<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

pub(crate) fn kernel_matrix(inputs: &[StateVector], params: &SeKernelParams) -> DMatrix<f64> {
    let n = inputs.len();
    let diag = if params.noise_var > 0.0 { params.noise_var } else { KERNEL_JITTER };
    DMatrix::from_fn(n, n, |i, j| {
        kernel(&inputs[i], &inputs[j], params) + if i == j { diag } else { 0.0 }
    })
}

impl GpAxisModel {
    fn fit(inputs: Arc<[StateVector]>, targets: DVector<f64>, params: SeKernelParams) -> Result<Self> {
        if inputs.is_empty() {
            return Ok(Self { params, inputs, targets, chol: None, alpha: DVector::zeros(0) });
        }
        let k = kernel_matrix(&inputs, &params);
        let chol = k.cholesky().ok_or(Error::KernelNotPositiveDefinite)?;
        let alpha = chol.solve(&targets);
        Ok(Self { params, inputs, targets, chol: Some(chol), alpha })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// `K^{-1} D` for this axis.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn cross_covariance(&self, z: &StateVector) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.inputs.iter().map(|zi| kernel(z, zi, &self.params)))
    }

    /// Solve `K x = b` with the cached factorization.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.chol {
            Some(c) => c.solve(b),
            None => DMatrix::zeros(0, b.ncols()),
        }
    }

    /// `L^{-1} B` where `K = L L'`.
    pub fn whiten(&self, mut b: DMatrix<f64>) -> DMatrix<f64> {
        match &self.chol {
            Some(c) => {
                c.l_dirty().solve_lower_triangular_mut(&mut b);
                b
            }
            None => DMatrix::zeros(0, b.ncols()),
        }
    }

    pub fn predict(&self, z: &StateVector) -> Prediction {
        let prior = self.params.signal_var;
        let Some(chol) = &self.chol else {
            return Prediction { mean: 0.0, var: prior };
        };
        let ks = self.cross_covariance(z);
        let mean = ks.dot(&self.alpha);
        let mut v = ks;
        chol.l_dirty().solve_lower_triangular_mut(&mut v);
        Prediction { mean, var: prior - v.norm_squared() }
    }
}

/// Three independent per-axis GPs sharing training inputs.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub axes: [GpAxisModel; 3],
}

impl GpModel {
    pub fn fit(dataset: &GpDataset, params: SeKernelParams) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Self::fit_per_axis(dataset, [params; 3])
    }

    pub fn fit_per_axis(dataset: &GpDataset, params: [SeKernelParams; 3]) -> Result<Self> {
        for p in &params {
            p.validate()?;
        }
        let inputs: Arc<[StateVector]> = dataset.inputs.clone().into();
        let fit = |axis: usize| GpAxisModel::fit(inputs.clone(), dataset.axis_targets(axis), params[axis]);
        Ok(Self { axes: [fit(0)?, fit(1)?, fit(2)?] })
    }

    /// Model with no data: prior mean zero, prior variance everywhere.
    pub fn prior(params: SeKernelParams) -> Result<Self> {
        params.validate()?;
        Self::fit_per_axis(&GpDataset::default(), [params; 3])
    }

    pub fn len(&self) -> usize {
        self.axes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes[0].is_empty()
    }

    pub fn predict(&self, z: &StateVector) -> [Prediction; 3] {
        [self.axes[0].predict(z), self.axes[1].predict(z), self.axes[2].predict(z)]
    }

    pub fn predict_mean(&self, z: &StateVector) -> Vector3 {
        let p = self.predict(z);
        Vector3::new(p[0].mean, p[1].mean, p[2].mean)
    }
}
