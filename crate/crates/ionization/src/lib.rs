//! Ionization of a two-dimensional bound state by a time-periodic point
//! interaction.
//!
//! The crate solves the Volterra equation for the charge `q(t)`, rebuilds
//! the survival amplitude and the mass from it, and analyses the same
//! problem in the Laplace domain: strip systems, the ionization pole,
//! residues and the branch-cut tail.

pub mod charge;
pub mod error;
pub mod laplace;
pub mod model;
pub mod observables;
pub mod poles;
pub mod specfun;

pub use error::{Error, Result};
