use core::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};

#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

use crate::{Error, Result};

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange(p))
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() * (0.5 * FRAC_2_SQRT_PI / SQRT_2)
}

/// Inverse of the standard normal CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_probability(p)?;
    if p == 0.5 {
        return Ok(0.0);
    }
    // solve in the lower tail, reflect for p > 1/2
    let (q, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    // Abramowitz-Stegun 26.2.23 starting point, then Newton on Phi(-x) = q
    let t = (-2.0 * q.ln()).sqrt();
    let mut x = t - (2.515517 + 0.802853 * t + 0.010328 * t * t)
        / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    for _ in 0..50 {
        let step = (normal_cdf(-x) - q) / normal_pdf(x);
        x += step;
        if step.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    Ok(sign * x)
}

/// Regularized lower incomplete gamma `P(3/2, x/2)`, the CDF of the
/// chi-squared distribution with three degrees of freedom.
pub fn chi2_3dof_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s = (0.5 * x).sqrt();
    libm::erf(s) - FRAC_2_SQRT_PI * s * (-s * s).exp()
}

/// Survival function `1 - P(3/2, x/2)`, accurate in the upper tail.
pub fn chi2_3dof_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let s = (0.5 * x).sqrt();
    libm::erfc(s) + FRAC_2_SQRT_PI * s * (-s * s).exp()
}

fn chi2_3dof_pdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    x.sqrt() * (-0.5 * x).exp() * (0.5 * FRAC_2_SQRT_PI / SQRT_2)
}

/// Inverse of the chi-squared(3) CDF by safeguarded Newton iteration.
pub fn chi2_quantile_3dof(p: f64) -> Result<f64> {
    check_probability(p)?;
    let upper = p > 0.5;
    let target = if upper { 1.0 - p } else { p };
    // residual of the tail we are solving in; increasing in x for both
    let f = |x: f64| if upper { target - chi2_3dof_sf(x) } else { chi2_3dof_cdf(x) - target };
    let (mut lo, mut hi) = (0.0, 4.0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / chi2_3dof_pdf(x);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-15 * (1.0 + x) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}
