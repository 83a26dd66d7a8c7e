//! Pair creation from the vacuum at static scalar and vector potential steps.
//!
//! The crate has two halves. [`scattering`] is the analytic sharp-step model
//! (transmission coefficients, Klein windows, rates). Behind the `engine`
//! feature, [`dirac`] and [`observables`] evolve every negative-energy mode
//! of a discretised 1+1D Dirac Hamiltonian and read off created-particle
//! spectra, and [`sweep`] runs many transverse-momentum channels with
//! checkpointing.

pub mod dirac;
pub mod error;
pub mod io;
pub mod scattering;
pub mod units;

#[cfg(feature = "engine")]
pub mod observables;
#[cfg(feature = "engine")]
pub mod sweep;

pub use error::{Error, Result};
pub use units::{Case, Channel, FieldConfiguration, Grid1D, SimConfig};
