use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: {lhs:?} vs {rhs:?}")]
    Shape {
        context: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("backward target must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("tensor is not grad-enabled and cannot be a differentiation target")]
    NotGradEnabled,

    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("batch norm requires batch size >= 2 in train mode, got {0}")]
    BatchTooSmall(usize),

    #[error("per-sample penalty undefined under batch coupling: critic contains batch norm")]
    BatchCoupledCritic,

    #[error("invalid layer spec `{layer}`: {reason}")]
    LayerSpec { layer: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("checkpoint error in record `{record}`: {msg}")]
    Checkpoint { record: String, msg: String },

    #[error("bounding box {bbox:?} too small for patch size {patch}")]
    BboxTooSmall { bbox: (u32, u32, u32, u32), patch: usize },

    #[error("training aborted at iteration {iter}: {reason}")]
    TrainAborted { iter: u64, reason: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
