use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index out of range: requested {requested}, available {available}")]
    OutOfRange { requested: usize, available: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("exhaustive bound exceeded: {what} is {got}, limit {limit}")]
    TooLarge {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("code generation failed: found {found} codewords, needed {needed}")]
    InsufficientCodewords { found: usize, needed: usize },

    #[error("codebook verification failed: {0}")]
    CodebookInvalid(String),

    #[error("local randomness budget exhausted: need {need} bits, {left} left")]
    BudgetExhausted { need: usize, left: usize },

    #[error("strategy error: {0}")]
    Strategy(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
