use crate::spectral::Repr;
use thiserror::Error;

/// Errors from grid construction, transforms and symbol application.
#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field is {got}, operation requires {expected}")]
    WrongRepresentation { expected: Repr, got: Repr },
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("density has non-negligible imaginary part (max {max_imag:.3e})")]
    ComplexDensity { max_imag: f64 },
}

/// Errors from model construction and exact solutions.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Errors from file formats and configuration parsing.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors from time stepping and the run loop.
#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Diagnose(#[from] DiagnoseError),
    #[error("snapshot sink: {0}")]
    Io(#[from] std::io::Error),
}

/// Errors from fitting and post-processing.
#[derive(Debug, Error)]
pub enum DiagnoseError {
    #[error("{0}")]
    InvalidInput(String),
    #[error("only {got} usable modes in the fit window, need at least {need}")]
    WindowTooSmall { got: usize, need: usize },
    #[error("simplex did not converge within the evaluation budget")]
    NoConvergence,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}
