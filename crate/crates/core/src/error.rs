use thiserror::Error;

use crate::filtration::NodeIdx;

/// Errors raised by the stopping engine and its helpers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The tree failed structural linking or validation.
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    /// The prior set failed validation.
    #[error("invalid prior set: {0}")]
    InvalidPriors(String),
    /// A caller-supplied argument is out of its domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Two stopping rules (or a rule and a node) disagree on their floor.
    #[error("floor mismatch: expected node {expected}, found node {found}")]
    FloorMismatch { expected: usize, found: usize },
    /// An enumeration would exceed its size guard.
    #[error("size guard exceeded: {what} is {actual}, limit {limit}")]
    SizeGuard {
        what: &'static str,
        actual: u128,
        limit: u128,
    },
    /// The supremum over priors is not attained in equivalent mode.
    #[error("supremum {sup} not attained at node {node}")]
    Unattained { node: usize, sup: f64 },
    /// Conditioning on an event of zero probability under the prior.
    #[error("conditional expectation undefined at node {0}: zero density")]
    UndefinedConditional(usize),
    /// Doob decomposition requested for a family that is not a supermartingale.
    #[error("family is not a supermartingale at node {node} (excess {excess})")]
    NotSupermartingale { node: usize, excess: f64 },
}

impl Error {
    pub(crate) fn floor(expected: NodeIdx, found: NodeIdx) -> Self {
        Error::FloorMismatch {
            expected: expected.index(),
            found: found.index(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
