use thiserror::Error;

/// Errors raised by the discretization, solvers and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh parameter: {0}")]
    InvalidMesh(String),

    #[error("point ({x}, {y}) lies outside triangle {triangle}")]
    PointOutsideTriangle { triangle: usize, x: f64, y: f64 },

    #[error("no quadrature rule exact to degree {0} (supported: 1..=10)")]
    UnsupportedQuadrature(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("solve residual {residual:.3e} exceeds tolerance {tolerance:.1e} ({context})")]
    Residual {
        context: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("invalid Brownian path request: {0}")]
    Brownian(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sample {sample} failed: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("rate fit undefined: {0}")]
    RateFit(String),

    #[error("trajectories are not comparable: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
