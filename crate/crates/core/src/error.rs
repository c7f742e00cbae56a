use std::path::PathBuf;

/// Errors raised across the simulator, correlator and fitting layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is missing or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A simulation was asked to run outside the regime where its approximations hold.
    #[error("validity error: {0}")]
    Validity(String),

    /// A feature that should be present (a dip, a peak, a crossing) was not found.
    #[error("not found: {0}")]
    NotFound(String),

    /// A voltage or similar control value lies outside its allowed range.
    #[error("range error: {0}")]
    Range(String),

    /// Least-squares iteration stopped without meeting its convergence criteria.
    #[error("fit did not converge after {iterations} iterations (chi2 = {chi2:.6e})")]
    NoConvergence {
        iterations: usize,
        chi2: f64,
        last_params: Vec<f64>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
