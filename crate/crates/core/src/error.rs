//! Error type shared by every module in the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an input value was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested evaluation lies outside the model's domain
    /// (e.g. a junction driven past flat band).
    #[error("domain error: {0}")]
    Domain(String),

    /// The data cannot determine the requested parameters
    /// (rank-deficient design matrix, too few distinct abscissae).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// The breakpoint scan found no onset in the scanned voltage range.
    #[error("no onset detected in the scanned voltage range")]
    NoOnsetDetected,

    /// A field reconstruction has no real solution.
    #[error("reconstruction out of range: {0}")]
    OutOfRange(String),

    /// An iterative fit did not converge.
    #[error("fit failed after {iterations} iterations (sse {residual_sse:.6e}): {reason}")]
    FitFailed {
        iterations: usize,
        residual_sse: f64,
        reason: String,
    },

    /// A configuration file failed to parse or validate.
    #[error("config error ({context}): {message}")]
    Config { context: String, message: String },

    /// A dataset file does not match the expected schema.
    #[error("ingestion error in {file}, row {row}, column {column}: {message}")]
    Ingestion {
        file: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn ingestion(
        file: impl Into<String>,
        row: usize,
        column: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Ingestion {
            file: file.into(),
            row,
            column: column.into(),
            message: message.into(),
        }
    }
}
