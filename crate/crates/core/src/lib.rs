//! Binding-energy expansion of the mean-field Bose gas on the unit torus.
//!
//! The crate has three independent routes to the same numbers:
//! closed-form Bogoliubov lattice sums ([`series`]), a Rayleigh-Schroedinger
//! engine on a truncated excitation Fock space ([`perturbation`]), and exact
//! diagonalization of the N-body Hamiltonian on a band-limited mode set
//! ([`oracle`]).

pub mod bogoliubov;
pub mod error;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod oracle;
pub mod perturbation;
pub mod potential;
pub mod report;
pub mod series;
pub mod summation;

pub use error::{Error, Result};
pub use lattice::{ModeSet, Momentum};
pub use potential::PotentialSpec;
