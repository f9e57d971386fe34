use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("quadrature did not converge at {nodes} nodes (last estimates {previous} and {last})")]
    Quadrature { nodes: usize, previous: f64, last: f64 },
    #[error("non-finite log-likelihood contribution at row {row}")]
    NonFinite { row: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("covariance unavailable: {0}")]
    Covariance(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
