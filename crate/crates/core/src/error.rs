use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid model parameters (non-SPD scatter, bad dimensions, ...).
    #[error("model error: {0}")]
    Model(String),
    /// A log-density or posterior became non-finite.
    #[error("numerical breakdown at observation {i}, cluster {k}: {msg}")]
    Numerical { i: usize, k: usize, msg: String },
    #[error("cluster {k} has effective size {n_k:.3} (< 2)")]
    EmptyCluster { k: usize, n_k: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Every start of a fit failed; one message per start.
    #[error("all starts failed: {}", .0.join("; "))]
    Fit(Vec<String>),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Parse { .. } | Error::Io(_) | Error::Unsupported(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
