//! Pseudospectral Hartree-Fock for low-Z atoms in intense magnetic fields.

pub mod eigen;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod poisson;
pub mod spectral;

pub use error::{Error, Result};
