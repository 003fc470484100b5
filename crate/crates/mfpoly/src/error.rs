use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("degenerate spectrum (alpha = beta = {0}); the Chebyshev recurrence divides by delta, use the Newton path")]
    DegenerateSpectrum(f64),

    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("no convergence after {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("iteration breakdown: {0}")]
    Breakdown(String),

    #[error("coupling parameter alpha = {alpha} is inadmissible: {msg}")]
    InadmissibleAlpha { alpha: f64, msg: String },
}
