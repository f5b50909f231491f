//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge to relative tolerance {tol:e} (best estimate {estimate:e})")]
    QuadratureNonconvergence { tol: f64, estimate: f64 },

    #[error("mesh too coarse: h = {h:e} exceeds {limit:e}, one oscillation period needs at least four columns")]
    MeshTooCoarse { h: f64, limit: f64 },

    #[error("incompatible periodic trace: left and right boundary node layouts cannot be matched")]
    IncompatiblePeriodicTrace,

    #[error("meshing of profiles with jumps is only supported for piecewise-constant profiles")]
    DiscontinuousProfileUnsupported,

    #[error("singular flux: a_p(0) is undefined for p < 2 without regularization")]
    SingularFlux,

    #[error("singular jacobian: factorization failed at row {row} (pivot {pivot:e})")]
    SingularJacobian { row: usize, pivot: f64 },

    #[error("point ({x}, {y}) lies outside the mesh")]
    PointOutsideDomain { x: f64, y: f64 },

    #[error("missing cell solution: the resonant corrector needs one")]
    MissingCellSolution,

    #[error("forcing not reducible: the limit forcing is only defined for x-only data")]
    ForcingNotReducible,

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config validation error: {0}")]
    ConfigValidation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
