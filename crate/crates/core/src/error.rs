use thiserror::Error;

/// Errors raised anywhere in the simulation/estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// A state value became non-finite or exceeded the divergence bound.
    #[error("divergence at step {step} (t = {time}): {detail}")]
    Divergence {
        step: u64,
        time: f64,
        detail: String,
    },

    #[error("state error: {0}")]
    State(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("comparison error: {0}")]
    Comparison(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
