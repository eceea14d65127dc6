use std::fmt;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid project specification: {}", ViolationList(.0))]
    InvalidSpec(Vec<Violation>),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("negative startup cost {value} at state {state}; normalize the project first")]
    NegativeStartupCost { state: usize, value: f64 },

    #[error("numerical quality check failed in {context}: residual {residual:e} exceeds {bound:e}")]
    NumericalQuality {
        context: &'static str,
        residual: f64,
        bound: f64,
    },

    #[error("singular system in {0}")]
    Singular(&'static str),

    #[error("{what} exceeds size guard: {actual} > {limit}")]
    SizeGuard {
        what: &'static str,
        limit: usize,
        actual: usize,
    },

    #[error("no convergence after {sweeps} sweeps in {context}")]
    NonConvergence { context: &'static str, sweeps: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("instance file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by floating-point quality or convergence rather
    /// than by bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalQuality { .. } | Error::Singular(_) | Error::NonConvergence { .. }
        )
    }
}

struct ViolationList<'a>(&'a [Violation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
