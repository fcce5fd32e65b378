use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the algebra, dynamics, estimation and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{n_sites} sites exceeds the dense cap of {cap}")]
    CapExceeded { n_sites: usize, cap: usize },

    #[error("invalid locality {k} for a {n_sites}-site chain")]
    InvalidLocality { k: usize, n_sites: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot parse Pauli string {0:?}")]
    ParsePauli(String),

    #[error("operator is not Hermitian (imaginary expectation {0:e})")]
    NonHermitian(f64),

    #[error("Liouvillian fixed point is not unique (|λ1| = {second:e}, scale {scale:e})")]
    NonUniqueFixedPoint { second: f64, scale: f64 },

    #[error("state is not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("malformed system file, line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Config { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
