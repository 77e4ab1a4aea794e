use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spectral grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("unsupported derivative order: {0}")]
    UnsupportedOrder(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("index outside the supported lattice: {0}")]
    IndexOverflow(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("condition violated: {0}")]
    Condition(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
