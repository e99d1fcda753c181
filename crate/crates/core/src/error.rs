use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("Θ does not describe a physical state (eigenvalue {0:e})")]
    NotPhysical(f64),
    #[error("boost vector has |b| = {0}, must be below 1")]
    Superluminal(f64),
    #[error("product state: |b| = {0} is too close to 1")]
    ProductState(f64),
    #[error("SLOCC operator is singular (|det S| = {0:e})")]
    Singular(f64),
    #[error("operator lies outside the forward light cone")]
    NotPositive,
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error("bad decomposition: {0}")]
    BadDecomposition(String),
    #[error("state is entangled")]
    NotSeparable,
    #[error("no tangent simplex found within budget (best max vertex norm {best})")]
    SimplexNotFound { best: f64 },
    #[error("simplex is not tangent: {0}")]
    NotTangent(String),
    #[error("incompatible geometric data: {0}")]
    Incompatible(String),
    #[error("length mismatch: |b| = {0}, |target| = {1}")]
    LengthMismatch(f64, f64),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
