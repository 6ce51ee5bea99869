use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular (condition estimate {0:e})")]
    Singular(f64),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("training diverged at step {step} (loss {loss:e})")]
    Divergence { step: usize, loss: f64 },

    #[error("width {width} is below the required {required} ({reason})")]
    WidthTooSmall {
        width: usize,
        required: usize,
        reason: String,
    },

    #[error("path leaves the regularized set at t = {t}: {detail}")]
    MembershipViolation { t: f64, detail: String },

    #[error("no interpolator found after {restarts} restarts (best loss {best_loss:e})")]
    NoInterpolator { restarts: usize, best_loss: f64 },

    #[error("ambiguous component sign at coordinate {coord} (|A W_1| = {value:e})")]
    AmbiguousSign { coord: usize, value: f64 },

    #[error("path endpoints lie in the same component class")]
    SameComponent,

    #[error("dimension {d} exceeds the supported limit {limit}")]
    DimensionTooLarge { d: usize, limit: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that signal a violated theorem precondition rather than bad input.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_)
                | Error::WidthTooSmall { .. }
                | Error::MembershipViolation { .. }
                | Error::SameComponent
        )
    }

    /// True for numerical breakdowns (divergence, singularity, iteration caps).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::NumericFailure(_)
                | Error::Divergence { .. }
                | Error::NoInterpolator { .. }
        )
    }
}
