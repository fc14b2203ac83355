use thiserror::Error;

/// Everything that can go wrong inside the library.
///
/// The variants map onto the CLI exit codes in [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("contraction error: {0}")]
    Contraction(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("integration did not converge in {context}: achieved error {achieved:.3e} (tolerance {tolerance:.3e})")]
    Integration {
        context: String,
        achieved: f64,
        tolerance: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("resource limit exceeded: {message} (peak bond dimension {peak_bond_dim})")]
    Resource {
        message: String,
        peak_bond_dim: usize,
    },

    #[error("process tensor file error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Validation(_) | Error::Schedule(_) | Error::Json(_) => 2,
            Error::Integration { .. }
            | Error::Numeric(_)
            | Error::Domain(_)
            | Error::Resource { .. }
            | Error::Shape(_)
            | Error::Contraction(_) => 3,
            Error::Io(_) | Error::Format(_) => 4,
        }
    }

    /// Short machine-readable tag naming the failure class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Contraction(_) => "contraction",
            Error::Numeric(_) => "numeric",
            Error::Integration { .. } => "integration",
            Error::Domain(_) => "domain",
            Error::Validation(_) => "validation",
            Error::Config(_) => "config",
            Error::Schedule(_) => "schedule",
            Error::Resource { .. } => "resource",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
