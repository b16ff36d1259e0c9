use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(ValidationReport),

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error("no feasible action in state {state}")]
    NoFeasibleAction { state: usize },

    #[error("flow conservation violated at node {node}: {detail}")]
    FlowConservation { node: usize, detail: String },

    #[error("internal consistency error at node {node}: {detail}")]
    Consistency { node: usize, detail: String },

    #[error("oracle limited to desk scale: {0}")]
    OracleScale(String),

    #[error("lower-bound policy preconditions violated: {0}")]
    LowerBoundPreconditions(String),

    #[error("segment not non-decreasing at offset {offset}")]
    NotNonDecreasing { offset: usize },

    #[error("transformation precondition violated at offset {offset}: {detail}")]
    TransformPrecondition { offset: usize, detail: String },

    #[error("empty measurement window (horizon {horizon}, burn-in {burn_in})")]
    EmptyWindow { horizon: u64, burn_in: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trace format error: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
