use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("unknown reference kind `{0}`")]
    UnknownReference(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("window [{start}, {end}] exceeds reference of {len} samples")]
    WindowOutOfRange { start: usize, end: usize, len: usize },
    #[error("probability {0} outside (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("kernel matrix is not positive definite (duplicate inputs with zero noise?)")]
    KernelNotPositiveDefinite,
    #[error("linearized covariance factorization failed")]
    CovarianceFactorization,
    #[error("horizon must contain at least one stage")]
    EmptyHorizon,
    #[error("R + B'PB is singular at stage {0}")]
    SingularInputHessian(usize),
    #[error("intermediate-variable system is not positive definite")]
    GammaFactorization,
    #[error("thrust vector norm {0} m/s^2 is too small to define an attitude")]
    FreeFall(f64),
    #[error("non-finite simulator state at t = {0} s")]
    NonFiniteState(f64),
}
