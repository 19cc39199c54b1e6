use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed problem document: {0}")]
    Malformed(String),

    #[error("invalid problem at {location}: {message}")]
    Invalid { location: String, message: String },

    #[error("degenerate condition set: rank {rank} < {n}")]
    DegenerateConditions { rank: usize, n: usize },

    #[error("index {index} out of range for order {n}")]
    OutOfRange { index: usize, n: usize },

    #[error("strong regularity polynomial defined only for even n")]
    OddOrder,

    #[error("identically zero F")]
    ZeroPolynomial,

    #[error("spectral parameter must be nonzero")]
    ZeroLambda,

    #[error("decaying exponentials do not form a prefix 0..p-1 at this point")]
    NonPrefixSplit,

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("near-eigenvalue: characteristic matrix unstable (|det| = {det:e}, scale = {scale:e})")]
    NearEigenvalue { det: f64, scale: f64 },

    #[error("problem not regular at p = {p}")]
    NotRegular { p: usize },

    #[error("quadrature under-resolved: {nodes} nodes, {required} required")]
    UnderResolved { nodes: usize, required: usize },

    #[error("zero of the characteristic determinant on the contour after {attempts} perturbations")]
    ZeroOnContour { attempts: usize },

    #[error("winding mismatch after subdivision: parent {parent}, children {children}")]
    WindingMismatch { parent: i64, children: i64 },

    #[error("sampling failed after {attempts} attempts: {reason}")]
    Sampling { attempts: usize, reason: String },

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            location: location.into(),
            message: message.into(),
        }
    }
}
