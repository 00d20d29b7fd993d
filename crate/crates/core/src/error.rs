use alloc::string::String;

use crate::C64;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("numerical failure in {what}: residual {residual:e}")]
    NumericalFailure { what: &'static str, residual: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid rigging operator: {0}")]
    InvalidRigging(String),
    #[error("invalid lattice window: {0}")]
    InvalidWindow(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("boundary value undefined at lambda = {lambda}: {reason}")]
    BoundaryUndefined { lambda: f64, reason: &'static str },
    #[error("resonance hit: 1 + T J_r is not invertible at r = {r}")]
    ResonanceHit { r: C64 },
    #[error("operation not supported for the {0} backend")]
    UnsupportedBackend(&'static str),
    #[error("operation requires a straight coupling path: {0}")]
    UnsupportedPath(&'static str),
    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("ill-posed: {0}")]
    IllPosed(String),
    #[error("resonance points {a} and {b} are closer than 4 delta; reduce the exclusion radius")]
    Resolution { a: f64, b: f64 },
    #[error("ambiguous half-plane for pole {r}; decrease y")]
    AmbiguousSign { r: C64 },
    #[error("pole {r} lies on the integration contour; adjust the radius")]
    ContourCollision { r: C64 },
    #[error("tracking failure: {0}")]
    TrackingFailure(String),
    #[error("fibre ranks differ: {target} (target) vs {source_dim} (source)")]
    RankMismatch { target: usize, source_dim: usize },
    #[error("theta = {theta} collides with a final eigenphase; shift theta")]
    AmbiguousTheta { theta: f64 },
    #[error("off-axis scattering matrix not close to 1 at y = {y_max} (trace-norm deviation {deviation:e}); increase y_max")]
    StartTolerance { y_max: f64, deviation: f64 },
    #[error("resonance point r = {r} inside the coupling interval")]
    ResonanceInPath { r: f64 },
    #[error("inconsistent result: {0}")]
    Inconsistent(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
