use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: usize, dst: usize },

    #[error("duplicate inter-layer edge ({0}, {1}) -- ({2}, {3})")]
    DuplicateInterEdge(usize, usize, usize, usize),

    #[error("layer {0} is directed; diffusion operators need undirected layers")]
    DirectedLayer(usize),

    #[error("network already has inter-layer edges")]
    InterEdgesPresent,

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("eigensolver failed to converge")]
    NoConvergence,

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("backward needs a scalar loss, got shape {0}x{1}")]
    NonScalarLoss(usize, usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("parameter {0:?} is already registered")]
    DuplicateParam(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(op: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(Error::Shape { op, detail: detail.into() })
}
