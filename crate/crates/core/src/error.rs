use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid safety parameters: {0}")]
    InvalidParams(String),

    #[error("rho {0} is outside [{min}, {max}]", min = crate::safety::RHO_MIN, max = crate::safety::RHO_MAX)]
    InvalidRho(f64),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// No observation has a margin strictly inside (0, 1), so the likelihood
    /// is flat in rho.
    #[error("rho is unidentifiable: no observation has a margin strictly inside (0, 1)")]
    UnidentifiableRho,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("segment error at line {line}: {message}")]
    Segment { line: usize, message: String },

    #[error("ratings without matching trajectory segments: {}", keys.join(", "))]
    Join { keys: Vec<String> },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
