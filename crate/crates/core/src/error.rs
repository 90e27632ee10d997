use thiserror::Error;

/// Error type shared by every module in the crate.
///
/// The CLI maps these onto its exit-code contract: anything that indicates
/// malformed input exits 2, `EnumerationCapExceeded` exits 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("conditioning on an event of probability zero")]
    ZeroProbabilityEvent,

    #[error("blocks do not partition the sample space: {0}")]
    NotAPartition(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("enumeration needs {needed} entries but the cap is {cap}")]
    EnumerationCapExceeded { needed: u128, cap: u128 },

    #[error("unsupported graph family: {0}")]
    UnsupportedFamily(String),

    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("random network code still rank-deficient after {0} retries (field too small?)")]
    RankDeficientAfterRetries(usize),

    #[error("receiver {0} is not reachable from the source")]
    UnreachableReceiver(String),

    #[error("transfer matrix is singular for receiver {0}")]
    SingularTransfer(String),

    #[error("received word has more errors than the decoding radius {0}")]
    TooManyErrors(usize),

    #[error("bad payload header: {0}")]
    BadHeader(String),

    #[error("no solution: the affine system is inconsistent")]
    NoSolution,

    #[error("measured value breaks a declared bound: {0}")]
    BoundViolated(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
