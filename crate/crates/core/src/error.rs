use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("model not certified: {0}")]
    Uncertified(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:.3e}")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error(
        "solver did not converge after {iterations} iterations (relative residual {residual:.3e})"
    )]
    Solver { iterations: usize, residual: f64 },

    #[error("eigen iteration did not converge after {iterations} iterations")]
    Eigen { iterations: usize },

    #[error("construction error: {0}")]
    Construction(String),

    #[error("instability: {0}")]
    Unstable(String),

    #[error("flow diverged at t = {t}: sup|w| = {sup_w:.3e}")]
    Divergence { t: f64, sup_w: f64 },

    #[error("cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
