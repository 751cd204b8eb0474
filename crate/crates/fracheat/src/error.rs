//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by grid construction, operator evaluation, the solver,
/// and the verification diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid parameters violate a structural precondition (dimension, parity,
    /// sign, size).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A sampled or loaded field contains a non-finite value.
    #[error("non-finite sample at flat index {index}: {value}")]
    NonFiniteSample { index: usize, value: f64 },

    /// Parameters outside their documented domain (exponents, tolerances,
    /// panel counts, ...).
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Two fields (or a field and a grid) that must share a shape do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A requested evaluation point lies outside the grid box or window.
    #[error("point outside domain: {0}")]
    OutsideDomain(String),

    /// The singular kernel was requested at its singularity.
    #[error("kernel evaluated at its singularity (t = 0)")]
    KernelSingular,

    /// A time series is too short for the requested stencil or window.
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    /// Normalisation calibration did not reproduce the symbol on the
    /// reference wave to the required residual.
    #[error("calibration residual {residual:.3e} exceeds {limit:.3e}")]
    CalibrationFailed { residual: f64, limit: f64 },

    /// The plane-reflection parameter is outside the open box.
    #[error("reflection plane λ = {lambda} outside box (-{half_width}, {half_width})")]
    PlaneOutsideBox { lambda: f64, half_width: f64 },

    /// A nonlinearity was queried outside its declared Lipschitz domain.
    #[error("value {value} outside declared Lipschitz interval [{lo}, {hi}]")]
    OutsideLipschitzDomain { value: f64, lo: f64, hi: f64 },

    /// Eigensolve failed to reach the requested residual.
    #[error("eigensolve did not converge: residual {residual:.3e} after {iterations} iterations")]
    EigenNoConvergence { residual: f64, iterations: usize },

    /// Barrier time exponent must be the reciprocal of an odd integer below s.
    #[error("barrier exponent β = {beta} rejected: {reason}")]
    BarrierExponent { beta: f64, reason: String },

    /// Serialization / deserialization failure (field codec, reports).
    #[error("codec error: {0}")]
    Codec(String),

    /// Configuration parse or validation failure; includes a path/field hint
    /// when available.
    #[error("config error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand used by validators.
    pub(crate) fn param(msg: String) -> Self {
        Error::InvalidParam(msg)
    }
}
