use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value violated a type invariant at construction time.
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("fiber line has no segments")]
    EmptyLine,

    /// Zero group birefringence: the pump components never separate.
    #[error("group birefringence is zero, walk-off length is infinite")]
    InfiniteWalkoff,

    #[error("filter passband [{lo} THz, {hi} THz] is not covered by the detuning grid [{grid_lo} THz, {grid_hi} THz]")]
    Coverage {
        lo: f64,
        hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },

    #[error("visibility undefined: maximum and minimum coincidence probability are both zero")]
    UndefinedVisibility,

    #[error("degenerate fringe data: {0}")]
    DegenerateData(String),

    #[error(
        "insufficient fringe points: need at least {needed} distinct analyzer angles, got {got}"
    )]
    InsufficientPoints { needed: usize, got: usize },

    #[error("fringe fit did not converge after {iterations} iterations (best visibility {best_visibility:.6})")]
    FitDidNotConverge {
        iterations: usize,
        best_visibility: f64,
        best: Box<crate::fringe::FitResult>,
    },
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        field,
        reason: reason.into(),
    }
}
