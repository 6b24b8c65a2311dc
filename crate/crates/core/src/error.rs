use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    EmptyTrajectory,
    UnknownLocation(u32),
    DecreasingTimestamp { position: usize },
    InvalidParameter { name: &'static str, reason: String },
    EmptyQuery,
    RootHasNoPrefix,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyTrajectory => f.write_str("trajectory must contain at least one location"),
            Error::UnknownLocation(id) => write!(f, "location id {id} is outside the universe"),
            Error::DecreasingTimestamp { position } => {
                write!(f, "timestamp decreases at position {position}")
            }
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::EmptyQuery => f.write_str("count query needs at least one location"),
            Error::RootHasNoPrefix => f.write_str("the virtual root has no prefix"),
        }
    }
}

impl core::error::Error for Error {}
