use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("density has non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("density has negative value {value} at index {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("density mass {mass} is not positive and finite")]
    ZeroMass { mass: f64 },
    #[error("region does not intersect the grid support")]
    EmptyRegion,
    #[error("grids do not match")]
    GridMismatch,
    #[error("rejection envelope is degenerate (max density {max})")]
    DegenerateEnvelope { max: f64 },
    #[error("{count} samples fall outside the grid support")]
    OutOfSupport { count: usize },
    #[error("adaptive quadrature exceeded maximum depth (partial value {partial})")]
    MaxDepthExceeded { partial: f64 },
    #[error("support error: {0}")]
    Support(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("contour has zero length")]
    DegenerateContour,
    #[error("band mass {mass:e} is too small to resolve the contour density")]
    BandTooThin { mass: f64 },
    #[error("value {0} outside the open interval (0, 1)")]
    OutOfRange(f64),
    #[error("moment constraints are infeasible: {0}")]
    Infeasible(String),
    #[error("solver did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("pushforward density is not positive at sample {index}")]
    NonpositiveDensity { index: usize },
    #[error("likelihood evaluation failed at every parameter node")]
    AllCellsFailed,
    #[error("map is not monotone on the parameter grid")]
    NonMonotoneMap,
    #[error("observed density has support where the prior pushforward vanishes (mass {mass:e})")]
    SupportViolation { mass: f64 },
    #[error("covariance matrix is not positive semidefinite")]
    NotPsd,
    #[error("field has a non-positive value at sample {sample}, node {node}")]
    NonpositiveField { sample: usize, node: usize },
    #[error("least squares problem is ill conditioned (condition number {cond:e})")]
    IllConditioned { cond: f64 },
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
