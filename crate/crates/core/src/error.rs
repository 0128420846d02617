use std::fmt;

/// Errors produced by the tuning library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A zero pivot was hit during Gauss-Jordan elimination. The posterior
    /// precision matrix is expected to stay near-diagonal; hitting this
    /// usually means the strength scales are far too small for the
    /// parameter magnitudes (rescale the parameters).
    #[error("singular matrix: |pivot| < {threshold:e} at elimination row {row}")]
    SingularMatrix { row: usize, threshold: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    /// The oracle subprocess answered with something other than a valid,
    /// in-order response line.
    #[error("oracle protocol error: {0}")]
    Protocol(String),

    /// The oracle subprocess died, closed its stream, or timed out.
    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("run {run} (seed {seed}) failed: {source}")]
    Run {
        run: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidArgument(msg.to_string())
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Error::Config(msg.to_string())
    }

    pub fn protocol(msg: impl fmt::Display) -> Self {
        Error::Protocol(msg.to_string())
    }

    /// Attach run context to an error bubbling out of a single run.
    pub fn in_run(self, run: usize, seed: u64) -> Self {
        Error::Run {
            run,
            seed,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
