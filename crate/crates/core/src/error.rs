use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("bundle mismatch: {0}")]
    BundleMismatch(String),
    #[error("degree bookkeeping violated: {0}")]
    Degree(String),
    #[error("graded symmetry violated: {0}")]
    Symmetry(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("contraction identity {identity} fails on {witness}")]
    Contraction { identity: String, witness: String },
    #[error("not nilpotent: {0}")]
    NotNilpotent(String),
    #[error("not invertible: {0}")]
    NotInvertible(String),
    #[error("not surjective: {0}")]
    NotSurjective(String),
    #[error("non-constant coefficients: {0}")]
    NonConstant(String),
    #[error("point is not classical: {0}")]
    NotClassical(String),
    #[error("fibered product not realizable: {0}")]
    Unrealizable(String),
    #[error("arity guard exceeded: {0}")]
    ArityGuard(String),
    #[error("t-degree cap exceeded: {0}")]
    DegreeCap(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
