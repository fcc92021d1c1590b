use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate configuration: centered norm {norm:e} is below 1e-12")]
    DegenerateConfiguration { norm: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("shapes are too far apart for the log map (theta = {theta:.9}, limit pi/2 - 1e-6)")]
    NearCutLocus { theta: f64 },

    #[error("{what} did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("kernel matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid dictionary: {0}")]
    InvalidDictionary(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("coding failed at frame {frame}, dictionary {class}: {source}")]
    Coding {
        frame: usize,
        class: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("frame {frame} has {found} values, expected {expected}")]
    ShapeMismatch {
        frame: usize,
        expected: usize,
        found: usize,
    },

    #[error("unsupported landmark dimension {0} (expected 2 or 3)")]
    UnsupportedDim(usize),

    #[error("format version {found} is incompatible with {expected}")]
    VersionMismatch { found: String, expected: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short identifier, used by the CLI for machine-parsable errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateConfiguration { .. } => "degenerate_configuration",
            Error::InvalidConfiguration(_) => "invalid_configuration",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NearCutLocus { .. } => "near_cut_locus",
            Error::NoConvergence { .. } => "no_convergence",
            Error::InvalidProblem(_) => "invalid_problem",
            Error::NotPsd { .. } => "not_psd",
            Error::InvalidDictionary(_) => "invalid_dictionary",
            Error::DegenerateLabels(_) => "degenerate_labels",
            Error::Coding { .. } => "coding",
            Error::Parse { .. } => "parse",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::UnsupportedDim(_) => "unsupported_dim",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::InvalidInput(_) => "invalid_input",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
