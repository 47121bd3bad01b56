//! Numerical toolkit for bottleneck arguments on quantum and classical Gibbs
//! samplers: dense operators, model Hamiltonians, Lindbladian samplers,
//! path-integral estimates, lattice fault lines, stabilizer codes and
//! classical Markov chains.

pub mod bottleneck;
pub mod classical;
pub mod codes;
pub mod error;
pub mod feynman_kac;
pub mod hamiltonians;
pub mod krylov;
pub mod lattice;
pub mod lindblad;
pub mod operator;
pub mod rng;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
