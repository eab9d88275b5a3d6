use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("conflicting entries: {0}")]
    Conflict(String),

    #[error("empty determinant space: {0}")]
    EmptySpace(String),

    #[error("series did not terminate within {max_power} powers")]
    NonNilpotent { max_power: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        what: String,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("quasi-degenerate denominator {denominator:.3e} for excitation {label}")]
    QuasiDegenerate { label: String, denominator: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("internal amplitude {0} found in an external operator")]
    Contamination(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("algebra {0} is not a sub-system embedding sub-algebra for this manifold")]
    NotSes(String),

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NonHermitian(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Format(_) => "E_FORMAT",
            Error::Index(_) => "E_INDEX",
            Error::Conflict(_) => "E_CONFLICT",
            Error::EmptySpace(_) => "E_EMPTY_SPACE",
            Error::NonNilpotent { .. } => "E_NON_NILPOTENT",
            Error::Shape(_) => "E_SHAPE",
            Error::Convergence { .. } => "E_CONVERGENCE",
            Error::QuasiDegenerate { .. } => "E_QUASI_DEGENERATE",
            Error::LinearSolve(_) => "E_LINEAR_SOLVE",
            Error::Contamination(_) => "E_CONTAMINATION",
            Error::Usage(_) => "E_USAGE",
            Error::NotSes(_) => "E_NOT_SES",
            Error::NonHermitian(_) => "E_NON_HERMITIAN",
            Error::Io(_) => "E_IO",
        }
    }
}
