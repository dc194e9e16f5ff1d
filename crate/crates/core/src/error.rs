use crate::lattice::DyadicCube;

/// Errors raised by the library operations.
///
/// Three-valued oracle answers and failed verification verdicts are values,
/// not errors.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("the root cube has no parent")]
    RootHasNoParent,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid cube: {0}")]
    InvalidCube(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid set model: {0}")]
    InvalidSet(String),
    #[error("the set is empty")]
    EmptySet,
    #[error("the family is empty")]
    EmptyFamily,
    #[error("root {0} does not meet E")]
    RootIsFree(DyadicCube),
    #[error("alpha {0} out of range")]
    AlphaOutOfRange(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no free cube within the search depth below {0}")]
    PorosityFailure(DyadicCube),
    #[error("family is not parent-closed: parent of {0} is missing")]
    NotParentClosed(DyadicCube),
    #[error("cube {0} is not a member of the family")]
    NotAMember(DyadicCube),
    #[error("unbounded weighted measure on cell {0}")]
    UnresolvedMeasure(DyadicCube),
}

pub type Result<T> = std::result::Result<T, Error>;
