use thiserror::Error;

/// Errors raised while building grids, operators, factorizations or runs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("cannot coarsen a {nr}x{ntheta} grid: {reason}")]
    CannotCoarsen {
        nr: usize,
        ntheta: usize,
        reason: &'static str,
    },

    #[error("singular Jacobian at r = {r}, theta = {theta} (|det DF| = {det:e})")]
    SingularJacobian { r: f64, theta: f64, det: f64 },

    #[error("right-hand side lost accuracy at r = {r}, theta = {theta}: Richardson estimate differs by {diff:e}")]
    RhsAccuracy { r: f64, theta: f64, diff: f64 },

    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("structurally singular matrix: zero pivot at row {row}")]
    StructurallySingular { row: usize },

    #[error("{0}")]
    Dimension(String),

    #[error("factorization of {kind} line {line} failed: {source}")]
    LineFactorization {
        kind: &'static str,
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("smoother switching rule requires a uniform angular grid")]
    NonUniformAngles,

    #[error("invalid value for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Dimension(format!(
            "{what}: length {got} does not match grid size {expected}"
        )));
    }
    Ok(())
}
