use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{function} is undefined at {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("variable order violates its admissibility bounds at t = {t}: {reason}")]
    InadmissibleOrder { t: f64, reason: String },

    #[error("unknown variable-order preset `{0}` (expected zero, one-minus-cos or t-sin-t)")]
    UnknownPreset(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("meshes are neither identical nor one refinement apart ({coarse} vs {fine} divisions)")]
    MeshMismatch { coarse: usize, fine: usize },

    #[error("invalid problem setup: {0}")]
    InvalidSetup(String),

    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
