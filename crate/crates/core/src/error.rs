use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid manifold spec: {0}")]
    InvalidSpec(String),

    #[error("warping function is non-positive at r = {r} (value {value})")]
    NonPositiveWarp { r: f64, value: f64 },

    #[error("cannot parse expression `{expr}`: {reason}")]
    Expression { expr: String, reason: String },

    #[error("vertex {0} is out of range")]
    VertexOutOfRange(usize),

    #[error("empty ball")]
    EmptyBall,

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("time step rejected: dt = {dt} fell below floor {floor}")]
    StepFloor { dt: f64, floor: f64 },

    #[error("Picard iteration did not converge in {iterations} iterations (last increment {increment:e}); use a smaller slab")]
    NoConvergence { iterations: usize, increment: f64 },

    #[error("maximum principle violated: w = {value} < 1 at vertex {vertex}")]
    MaximumPrinciple { vertex: usize, value: f64 },

    #[error("non-positive solution value {value} at vertex {vertex}")]
    NonPositive { vertex: usize, value: f64 },

    #[error("source vertex {0} lies outside the domain")]
    SourceOutsideDomain(usize),

    #[error("ball around vertex {center} with radius {radius} is clipped by the chart boundary")]
    Clipped { center: usize, radius: f64 },

    #[error("test function rejected: {0}")]
    TestFunction(String),

    #[error("too few samples: {got} (need at least {need})")]
    TooFewSamples { got: usize, need: usize },

    #[error("degenerate formula: {0}")]
    Degenerate(String),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
