use std::fmt;

/// Pipeline stage that declared a problem infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    ZeroForcing,
    TimeReversal,
    Femto,
    Macro,
    Centralized,
    Robust,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::ZeroForcing => "zero-forcing",
            Stage::TimeReversal => "time-reversal",
            Stage::Femto => "femto",
            Stage::Macro => "macro",
            Stage::Centralized => "centralized",
            Stage::Robust => "robust",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed vector: {0}")]
    MalformedVector(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not Hermitian (asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("negative entry {value:e} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible at {stage} stage: {reason}")]
    Infeasible { stage: Stage, reason: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn infeasible(stage: Stage, reason: impl Into<String>) -> Self {
        Error::Infeasible {
            stage,
            reason: reason.into(),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. })
    }

    /// Numerical-failure class (as opposed to infeasibility or bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::Numerical(_) | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
