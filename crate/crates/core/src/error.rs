use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite coefficient value at t = {t}, x = {x:?}")]
    Numeric { t: f64, x: Vec<f64> },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("experiment error: {0}")]
    Experiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;
