use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty assortment")]
    EmptyAssortment,

    #[error("item {item} is not in the offered assortment")]
    ItemNotOffered { item: usize },

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("uncoverable prefix: {0}")]
    UncoverablePrefix(String),

    #[error("invalid cover: {0}")]
    InvalidCover(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
