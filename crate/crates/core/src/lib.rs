//! Hamiltonian and Lindbladian assignment for open quantum spin chains.

pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod pauli;

pub use error::{Error, Result};
