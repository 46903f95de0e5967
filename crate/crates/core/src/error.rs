use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {n} is not a power of two >= {min}")]
    InvalidGrid { n: usize, min: usize },

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("non-finite value in {context} at flat index {index}")]
    NonFinite { context: &'static str, index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("prescribed function has no positive values on the grid (max {max:e})")]
    NoPositivity { max: f64 },

    #[error("weighted mass {mass:e} is degenerate")]
    DegenerateMass { mass: f64 },

    #[error("Richardson extrapolation did not settle; successive estimates {history:?}")]
    ExtrapolationDiverged { history: Vec<f64> },

    #[error("{context}: normal equations ill-conditioned (condition {condition:e})")]
    IllConditioned { context: &'static str, condition: f64 },

    #[error("{context}: fit residual {residual:e} exceeds {limit:e}")]
    FitResidual {
        context: &'static str,
        residual: f64,
        limit: f64,
    },

    #[error("local expansion: log coefficient {found} differs from {expected} by more than {tol:e}")]
    LogCoefficient { found: f64, expected: f64, tol: f64 },

    #[error("gradient flow stagnated: dt {dt:e} after {steps} steps (residual {residual:e})")]
    Stagnation {
        dt: f64,
        steps: usize,
        residual: f64,
    },

    #[error("solver did not converge in {steps} steps; residual {residual:e}, peak trajectory tail {lambda_tail:?}")]
    NonConvergence {
        steps: usize,
        residual: f64,
        lambda_tail: Vec<f64>,
    },

    #[error("normalization impossible: mass {mass:e}")]
    Normalization { mass: f64 },

    #[error("normalized PDE residual {residual:e} exceeds {limit:e}")]
    PdeResidual { residual: f64, limit: f64 },

    #[error("peak height {lambda} below asymptotic threshold {threshold}")]
    NotAsymptotic { lambda: f64, threshold: f64 },

    #[error("prescribed function is non-positive ({value:e}) at the concentration point")]
    NonPositiveWeight { value: f64 },

    #[error("bubble fit diverged (initial residual {initial:e}, final {last:e})")]
    FitDiverged { initial: f64, last: f64 },

    #[error("inner radius {radius:e} is below the resolution limit {limit:e}")]
    Resolution { radius: f64, limit: f64 },

    #[error("snapshot I/O: {0}")]
    Io(#[from] std::io::Error),

    #[error("snapshot metadata: {0}")]
    Metadata(#[from] serde_json::Error),
}
