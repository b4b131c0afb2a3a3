use alloc::string::String;

/// Failures reported by the toolkit.
///
/// Argument problems are the caller's fault; numerical failures come from the
/// linear-algebra kernels (non-convergent SVD, non-PD covariance).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}

macro_rules! numerical {
    ($($arg:tt)*) => {
        $crate::error::Error::NumericalFailure(alloc::format!($($arg)*))
    };
}

pub(crate) use invalid;
pub(crate) use numerical;
