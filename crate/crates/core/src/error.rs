use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("quadrature did not converge: error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("integration failed at t = {t}: {reason} (after {steps} steps)")]
    Integration { t: f64, steps: usize, reason: String },

    #[error("size cap exceeded: {what} needs {needed}, cap is {cap}")]
    SizeCap { what: &'static str, needed: f64, cap: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("population count {count} exceeded cap {cap}")]
    Explosion { count: usize, cap: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
