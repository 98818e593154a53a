use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("support violation{}: {detail}", fmt_outcome(.outcome))]
    Support {
        outcome: Option<usize>,
        detail: String,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("covariance mismatch: {0}")]
    CovarianceMismatch(String),

    #[error("row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("chain is reducible: {0}")]
    Reducible(String),

    #[error("terminal set is unreachable from states {states:?}")]
    Unreachable { states: Vec<usize> },

    #[error(
        "fixed-point iteration diverged after {iterations} iterations \
         (convergence is only guaranteed when q >= 0 and alpha <= 1)"
    )]
    Diverged { iterations: usize },

    #[error("no convergence after {iterations} iterations (last change {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("every trajectory was truncated before reaching the terminal set")]
    AllTruncated,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_outcome(o: &Option<usize>) -> String {
    match o {
        Some(i) => format!(" at outcome {i}"),
        None => String::new(),
    }
}

impl Error {
    /// True for failures of a numerical method on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. }
                | Error::NotConverged { .. }
                | Error::Numerical(_)
                | Error::AllTruncated
                | Error::ResourceCap(_)
        )
    }

    pub(crate) fn support(outcome: Option<usize>, detail: impl Into<String>) -> Self {
        Error::Support {
            outcome,
            detail: detail.into(),
        }
    }
}
