use thiserror::Error;

/// Errors raised by the laboratory core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid packet frame: {0}")]
    InvalidFrame(String),

    #[error("field shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite value in field `{0}`")]
    NonFinite(&'static str),

    #[error("point ({r}, {z}) lies outside the grid hull")]
    OutsideHull { r: f64, z: f64 },

    #[error("source support touches the grid boundary")]
    SupportTouchesBoundary,

    #[error("elliptic solve did not reach tolerance {tol:e} after {iterations} iterations (residual {residual:e})")]
    NoConvergence { tol: f64, iterations: usize, residual: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("singular least-squares system in jet fit")]
    DegenerateFit,

    #[error("CFL violation: dt*max|u|/h = {0:.3} exceeds the limit")]
    Cfl(f64),

    #[error("series too short: need at least {need} records, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("invalid comparison state: {0}")]
    InvalidComparison(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
