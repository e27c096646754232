//! Spectral analysis, Bogoliubov diagonalization and topological invariants
//! of bosonic Bogoliubov-de Gennes Hamiltonians.
//!
//! A quadratic bosonic Hamiltonian is encoded by a one-particle operator `h`,
//! a symmetric pairing `Δ` and a chemical potential `μ`. The dynamical matrix
//! `H = J A` acts on the particle-hole space and is selfadjoint in the
//! indefinite (Krein) inner product defined by `J = diag(1, -1)`.

pub mod bdg;
pub mod error;
pub mod linalg;
pub mod models;
pub mod bogoliubov;
pub mod spectral;
pub mod topology;
pub mod halfspace;
pub mod dynamics;

pub use error::{Error, Result};
