use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("accuracy target not met: estimated error {estimate:e} exceeds {target:e}")]
    Accuracy { estimate: f64, target: f64 },

    #[error("series diverges: x = {x} is not below the threshold 1/e = {threshold}")]
    Divergence { x: f64, threshold: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("theorem hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("iterate collapsed towards zero: norm {norm:e} below half the Nehari bound {bound:e}")]
    Collapse { norm: f64, bound: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
