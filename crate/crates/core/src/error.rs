use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("backward called before a forward pass")]
    NoForwardPass,
    #[error("non-finite gradient at index {index}")]
    NonFiniteGradient { index: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty action subset")]
    EmptySubset,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("checkpoint format: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            got,
        })
    }
}
