use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SVD did not converge within {0} iterations")]
    SvdNoConvergence(usize),

    #[error("non-finite objective at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("found only {found} linearly independent columns, need {needed}")]
    InsufficientRank { found: usize, needed: usize },

    #[error("degenerate-filtration: surviving {0}x{0} system is rank deficient")]
    DegenerateFiltration(usize),

    #[error("projection-drops-dimension: top {0}x{0} block of the column basis is singular")]
    ProjectionDropsDimension(usize),

    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
