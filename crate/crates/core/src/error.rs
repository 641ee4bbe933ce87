use thiserror::Error;

use crate::state::TokenKind;

/// Errors raised by the edit operations and the decode loop.
///
/// Everything except [`EditError::LengthLimitExceeded`] is a contract
/// violation: the caller (usually a policy) handed in malformed input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("{op}: expected {expected} entries, got {actual}")]
    LengthMismatch { op: &'static str, expected: usize, actual: usize },
    #[error("boundary token at position {position} cannot be deleted")]
    BoundaryDeleted { position: usize },
    #[error("fill #{index} is a {kind:?} token; only regular tokens may fill a placeholder")]
    InvalidFill { index: usize, kind: TokenKind },
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("invalid decode config: {0}")]
    InvalidConfig(String),
    #[error("length limit exceeded: {length} > {limit}")]
    LengthLimitExceeded { length: usize, limit: usize },
}

impl EditError {
    pub fn is_contract_violation(&self) -> bool {
        !matches!(self, EditError::LengthLimitExceeded { .. })
    }
}
