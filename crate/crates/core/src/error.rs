use thiserror::Error;

/// Every failure the engine can report. Certification failures carry the
/// violated identity label and one offending entry as a witness.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("pole: {0}")]
    Pole(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is singular")]
    Singular,
    #[error("operator is not skew invertible")]
    NotSkewInvertible,
    #[error("operator is not strict skew invertible: {0}")]
    NotStrictSkewInvertible(String),
    #[error("pair is not compatible: {0}")]
    IncompatiblePair(String),
    #[error("identity {label} fails; witness {witness}")]
    IdentityFails { label: String, witness: String },
    #[error("entry cap exceeded: {0}")]
    ArityCapExceeded(String),
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("degenerate spectral point: {0}")]
    DegeneratePoint(String),
    #[error("2-contraction g is not invertible in W")]
    GNotInvertible,
    #[error("no slicing convention passes for {0}")]
    NoConventionPasses(String),
    #[error("classification inconclusive up to k = {0}")]
    InconclusiveWithinCap(usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn fails(label: impl Into<String>, witness: impl Into<String>) -> Self {
        Error::IdentityFails { label: label.into(), witness: witness.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
