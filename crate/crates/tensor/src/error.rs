use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

macro_rules! invalid_arg {
    ($($arg:tt)*) => {
        $crate::error::TensorError::InvalidArgument(format!($($arg)*))
    };
}

macro_rules! ensure_arg {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err($crate::error::TensorError::InvalidArgument(format!($($arg)*)));
        }
    };
}

pub(crate) use {ensure_arg, invalid_arg};
