use thiserror::Error;

/// Errors raised by the wave laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inadmissible viscosity matrix: {0}")]
    Viscosity(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("instability at step {step} (t = {time:.6e}): {detail}")]
    Instability {
        step: usize,
        time: f64,
        detail: String,
    },

    #[error("maximum principle violated at step {step} (t = {time:.6e}): range [{min:.6e}, {max:.6e}] outside [{lower:.6e}, {upper:.6e}]")]
    MaximumPrinciple {
        step: usize,
        time: f64,
        min: f64,
        max: f64,
        lower: f64,
        upper: f64,
    },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
