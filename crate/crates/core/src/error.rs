use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("instance too small: {0}")]
    InstanceTooSmall(String),
    #[error("decode failure: {0}")]
    DecodeFailure(String),
    #[error("protocol abort: {0}")]
    ProtocolAbort(String),
    #[error("bad file format: {0}")]
    BadFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
