use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violated a documented precondition. `field` names the offending input.
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("barrier interval empty")]
    EmptyBarrier,

    #[error("not opaque enough: exp(-2 D Re q) = {opacity:.3e} exceeds threshold {threshold:.1e}")]
    NotOpaqueEnough { opacity: f64, threshold: f64 },

    /// Evaluation requested outside the Wigner-Weisskopf validity region.
    #[error("light-cone restriction violated: (t - z) * Omega = {value:.3} < {margin} (Wigner-Weisskopf ansatz invalid at short times)")]
    LightCone { value: f64, margin: f64 },

    #[error("transmission underflow: |T| = exp({log_abs:.1}), phase is ill-conditioned")]
    TransmissionUnderflow { log_abs: f64 },

    #[error("quadrature did not converge: best estimate error {error_estimate:.3e} after {evaluations} evaluations")]
    NoConvergence { error_estimate: f64, evaluations: usize },

    #[error("mode overlap mismatch: direct sum and reduced form differ by {residual:.3e}")]
    OverlapMismatch { residual: f64 },

    #[error("no concentration found: peak band weight {peak:.3e} vs background {background:.3e}")]
    NoConcentration { peak: f64, background: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors raised by configuration or input validation, as opposed to numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput { .. }
                | Error::EmptyBarrier
                | Error::Config(_)
                | Error::LightCone { .. }
                | Error::NotOpaqueEnough { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
