use std::path::PathBuf;

/// Errors produced by the embedding toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{kind} id {id} out of range (size {len})")]
    IdOutOfRange { kind: &'static str, id: usize, len: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("triple ({0}, {1}, {2}) is not in the truth index")]
    UnknownTriple(usize, usize, usize),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("non-finite loss {loss} in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
