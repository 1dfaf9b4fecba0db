use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel evaluated on its diagonal")]
    DiagonalSingularity,
    #[error("point lies outside the closed upper half-plane: y = {0}")]
    OutOfDomain(f64),
    #[error("quadrature unstable: refinements differ by {diff:e} (tolerance {tol:e})")]
    QuadratureUnstable { diff: f64, tol: f64 },
    #[error("invalid resolution: {0}")]
    InvalidResolution(String),
    #[error("covariance not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },
    #[error("singular shift at v = {0}")]
    SingularShift(f64),
    #[error("region references index {index} outside 0..{len}")]
    RegionMismatch { index: usize, len: usize },
    #[error("localization weight not integrable near v for gamma = {gamma}")]
    SupercriticalWeight { gamma: f64 },
    #[error("bulk weight y^(-gamma^2/2) diverges on the bottom row for gamma = {gamma}")]
    DivergentWeight { gamma: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("conditioned path needs eps > 0")]
    DegenerateStart,
    #[error("index mismatch: {0}")]
    IndexMismatch(String),
    #[error("truncation bound {bound:e} exceeds tolerance {tol:e}")]
    TruncationTooShort { bound: f64, tol: f64 },
    #[error("rho must lie in (0, 1), got {0}")]
    InvalidRho(f64),
    #[error("empty sample")]
    EmptySample,
    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),
    #[error("no feasible parameters: {0}")]
    Infeasible(String),
    #[error("unknown parameter system {0:?}")]
    UnknownSystem(String),
    #[error("geometry violation: {0}")]
    GeometryViolation(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// The innermost error, with context layers peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}
