use thiserror::Error;

/// Error type shared by all library modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Input validation failure; `field` names the offending quantity.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    /// Quadrature grid cannot integrate the requested basis exactly.
    #[error("grid too coarse for cutoff: {message}")]
    Resolution { message: String },

    /// A conformal factor was sampled on a different grid than the basis.
    #[error("grid mismatch: factor has {factor_nodes} nodes, basis has {basis_nodes}")]
    GridMismatch {
        factor_nodes: usize,
        basis_nodes: usize,
    },

    /// An operation needing the 1/β form was requested without a positive floor.
    #[error("floor required: {0}")]
    FloorRequired(String),

    /// The weight form Q(β,·) is not positive definite.
    #[error("weight form not positive definite")]
    IndefiniteWeightForm,

    /// More eigenvalues were requested than the truncated basis carries.
    #[error("k_max={requested} beyond spectral range ({available} positive eigenvalues); increase the cutoff")]
    Truncation { requested: usize, available: usize },

    /// Rayleigh quotient evaluated on a (near-)kernel spinor.
    #[error("kernel input: Dφ vanishes, F(β)[φ] undefined")]
    KernelInput,

    /// Cluster bookkeeping produced an empty eigencluster.
    #[error("internal error: empty eigencluster at k={0}")]
    EmptyCluster(usize),

    /// Continuation schedule must strictly decrease towards p = n.
    #[error("p schedule must strictly decrease to n=2, got {0:?}")]
    NonDecreasingSchedule(Vec<f64>),

    /// File format error on import.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
