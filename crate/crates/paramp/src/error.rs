use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by the command line for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numeric,
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("occupation {occupation} on mode {mode} is outside the cutoff N = {cutoff}")]
    Truncation {
        mode: String,
        occupation: usize,
        cutoff: usize,
    },
    #[error("truncation tail {tail:.3e} exceeds {limit:.1e}; rerun with cutoff >= {suggested}")]
    TailTooLarge {
        tail: f64,
        limit: f64,
        suggested: usize,
    },
    #[error("mode {0} is not part of the layout")]
    UnknownMode(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("generator is not Hermitian (relative deviation {0:.3e})")]
    NonHermitian(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("step size underflow at t = {time:.3e} (step {step:.3e}, error estimate {error:.3e})")]
    StepUnderflow { time: f64, step: f64, error: f64 },
    #[error("quadrature did not converge: estimate {estimate:.9e}, error {error:.3e}")]
    Quadrature { estimate: f64, error: f64 },
    #[error(
        "fit rejected on channel {channel}: relative residual {residual:.3e} above {limit:.1e}"
    )]
    FitRejected {
        channel: String,
        residual: f64,
        limit: f64,
    },
    #[error("degenerate Monte Carlo proposal: {0}")]
    DegenerateProposal(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Truncation { .. }
            | Error::UnknownMode(_)
            | Error::LayoutMismatch(_)
            | Error::Config(_) => ErrorCategory::Config,
            Error::StepUnderflow { .. }
            | Error::Quadrature { .. }
            | Error::FitRejected { .. }
            | Error::TailTooLarge { .. } => ErrorCategory::Convergence,
            Error::NonHermitian(_) | Error::DegenerateProposal(_) | Error::Numeric(_) => {
                ErrorCategory::Numeric
            }
        }
    }
}
