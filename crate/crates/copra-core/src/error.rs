use thiserror::Error;

/// Errors produced across the selection pipeline.
#[derive(Debug, Error)]
pub enum CopraError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: matrix is {rows}x{cols} but observation has length {obs_len}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        obs_len: usize,
    },

    #[error("degenerate model: all singular values fall below the rank tolerance")]
    DegenerateModel,

    #[error("degenerate observation: all projected energies are zero")]
    DegenerateObservation,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular system: gamma = 0 with a rank-deficient decomposition")]
    Singular,

    #[error(
        "Newton iteration did not converge after {iterations} iterations (last iterate {last_gamma_tilde:.6e}, residual {residual:.6e})"
    )]
    NonConvergence {
        iterations: usize,
        last_gamma_tilde: f64,
        residual: f64,
    },

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse failure in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl CopraError {
    /// CLI exit code: 1 for bad input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CopraError::InvalidInput(_)
            | CopraError::DimensionMismatch { .. }
            | CopraError::Io { .. }
            | CopraError::Parse { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CopraError>;
