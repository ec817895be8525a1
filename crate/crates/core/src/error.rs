use thiserror::Error;

/// Errors raised by geometry, mapping, propagators and the reference solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("x = {x} lies outside the profile domain ({lo}, {hi})")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("cross-sectional area is not positive at x = {x} (A = {area})")]
    NonPositiveArea { x: f64, area: f64 },

    #[error("diffusion coefficient is not positive at x = {x} (D = {value})")]
    NonPositiveDiffusion { x: f64, value: f64 },

    #[error("quadrature on [{a}, {b}] did not reach tolerance (estimate {estimate:e}) within {evaluations} evaluations")]
    QuadratureFailure {
        a: f64,
        b: f64,
        estimate: f64,
        evaluations: usize,
    },

    #[error("y = {y} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { y: f64, lo: f64, hi: f64 },

    #[error("grid too small: need at least {needed} points, got {got}")]
    GridTooSmall { needed: usize, got: usize },

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("Gaussian-area curvature must be positive for eigenmode solutions, got a = {0}")]
    NegativeCurvature(f64),

    #[error("eigensolver failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error("linear system is singular or ill-conditioned: {0}")]
    SingularSystem(String),

    #[error("field integrity violated: {0}")]
    IntegrityError(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
