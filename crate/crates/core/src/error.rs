//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown model `{0}`")]
    NotFound(String),

    #[error("point outside grid bounds in dimension {dim}: {value} not in [{lower}, {upper}]")]
    OutOfDomain {
        dim: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("model does not expose control-affine dynamics")]
    UnsupportedModel,

    #[error("non-finite value produced at solver step {step}")]
    NumericalFailure { step: usize },

    #[error("no trusted grid nodes: {0}")]
    DegenerateDomain(String),

    #[error("sublevel set at level {level} is empty; raise the query slack")]
    DegenerateLevel { level: f64 },

    #[error("subsystems share state variables: {0}")]
    InvalidDecomposition(String),

    #[error("goal contracted by the tracking error bound is empty in dimension {dim}")]
    GoalTooSmall { dim: usize },

    #[error("planner could not produce a step: {0}")]
    PlannerStuck(String),

    #[error("initialization failed: {0}")]
    InitFailure(String),

    #[error("sensor radius {radius} below the minimum sensing radius {required}")]
    SensorTooSmall { radius: f64, required: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
