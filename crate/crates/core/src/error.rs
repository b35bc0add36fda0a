use thiserror::Error;

use crate::model::GroundElement;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration or construction parameter is out of its valid range.
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("user {user} has zero uplink rate to server {server}")]
    UnreachableServer { user: usize, server: usize },

    #[error("assignment violates the offloading constraints: {0}")]
    InfeasibleAssignment(String),

    #[error("element {0} is not part of the assignment")]
    NotInAssignment(GroundElement),

    #[error("element {0} is already part of the assignment")]
    AlreadyInAssignment(GroundElement),

    #[error("inconsistent allocation: {0}")]
    Inconsistent(String),

    #[error("exhaustive search refused: {feasible} feasible assignments exceed the limit of {limit}")]
    SearchTooLarge { feasible: u128, limit: u128 },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
