//! Optional hyperparameter selection by log marginal likelihood. Not used by
//! the controller unless asked for; the defaults are fixed.

use core::f64::consts::PI;

#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

use super::kernel::SeKernelParams;
use super::model::{kernel_matrix, GpDataset};
use crate::{Error, Result};

/// Sum over the three axes of `log p(D | Z, params)`.
pub fn log_marginal_likelihood(dataset: &GpDataset, params: &SeKernelParams) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    params.validate()?;
    let n = dataset.len() as f64;
    let chol = kernel_matrix(&dataset.inputs, params)
        .cholesky()
        .ok_or(Error::KernelNotPositiveDefinite)?;
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    let mut total = 0.0;
    for axis in 0..3 {
        let y = dataset.axis_targets(axis);
        let alpha = chol.solve(&y);
        total += -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n * (2.0 * PI).ln();
    }
    Ok(total)
}

/// Best candidate by marginal likelihood; candidates that fail to factor
/// are skipped.
pub fn grid_search(dataset: &GpDataset, candidates: &[SeKernelParams]) -> Option<(SeKernelParams, f64)> {
    candidates
        .iter()
        .filter_map(|p| log_marginal_likelihood(dataset, p).ok().map(|l| (*p, l)))
        .fold(None, |best, (p, l)| match best {
            Some((_, bl)) if bl >= l => best,
            _ => Some((p, l)),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{StateVector, Vector3};

    #[test]
    fn prefers_matching_noise_level() {
        let mut ds = GpDataset::default();
        for i in 0..20 {
            let mut z = StateVector::zeros();
            z[3] = -1.0 + 0.1 * i as f64;
            ds.push(z, Vector3::new(-z[3], 0.0, 0.0));
        }
        let good = SeKernelParams { noise_var: 1e-4, ..Default::default() };
        let bad = SeKernelParams { noise_var: 10.0, ..Default::default() };
        let (best, _) = grid_search(&ds, &[bad, good]).unwrap();
        assert_eq!(best, good);
        assert!(log_marginal_likelihood(&GpDataset::default(), &good).is_err());
    }
}
