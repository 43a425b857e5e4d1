use thiserror::Error;

/// Errors raised by the catgate library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("coherent-state tail mass {tail:e} beyond Fock cutoff {cutoff} is not below 1e-10")]
    TailTooHeavy { tail: f64, cutoff: usize },

    #[error("sec(mu) is singular at t = {t} (cos mu = {cos_mu:e})")]
    SingularSecant { t: f64, cos_mu: f64 },

    #[error("Lambda must be positive, got {0}")]
    LambdaDomain(f64),

    #[error("pre-training did not converge: max pointwise error {max_error:e}")]
    ConvergenceFailure { max_error: f64 },

    #[error("unknown gate '{0}'")]
    UnknownGate(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged: final fidelity {fidelity} after sweep {sweep}")]
    DivergenceDetected { fidelity: f64, sweep: usize },

    #[error("Lindblad integration unstable: trace drift {drift:e}")]
    StepUnstable { drift: f64 },

    #[error("wire mismatch: {0}")]
    WireMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSecant { .. }
                | Error::ConvergenceFailure { .. }
                | Error::DivergenceDetected { .. }
                | Error::StepUnstable { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
