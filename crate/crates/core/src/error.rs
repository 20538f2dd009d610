use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("search tree root has not been expanded")]
    RootNotExpanded,

    #[error("sparse sampling tree would have {0} nodes (limit {limit})", limit = crate::fsss::SPARSE_SAMPLING_NODE_LIMIT)]
    TreeTooLarge(u128),

    #[error("unknown {kind} `{name}`; available: {available}")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("the episode has already ended")]
    EpisodeOver,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
