use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph error: {0}")]
    Graph(String),

    #[error("morphism error: {0}")]
    Morphism(String),

    #[error("{0} must be connected")]
    Disconnected(String),

    #[error("word error: {0}")]
    Word(String),

    #[error("rank mismatch: {0}")]
    RankMismatch(String),

    #[error("subgroup has infinite index: {0}")]
    InfiniteIndex(String),

    #[error("commensuration error: {0}")]
    Commensuration(String),

    #[error("square complex error: {0}")]
    Complex(String),

    #[error("matrix error: {0}")]
    Matrix(String),

    #[error("averaging instance error: {0}")]
    Averaging(String),

    #[error("certificate error: {0}")]
    Certificate(String),

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(file: &str, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            file: file.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
