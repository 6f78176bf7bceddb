//! Simulation toolkit for dark-resonance (EIT) laser cooling of harmonically
//! trapped atoms and ions.
//!
//! The crate is organized around a pipeline: a [`scheme::LevelScheme`]
//! describes the internal levels, drives and decay channels; [`bloch`] solves
//! the optical Bloch equations for steady states and absorption spectra;
//! [`ratecool`] turns a scattering spectrum into sideband heating/cooling
//! rates and phonon dynamics; [`trajectory`] cross-checks the rate picture
//! with quantum-jump Monte Carlo on the joint internal ⊗ motional state;
//! [`ionstring`] extends single-ion results to linear ion crystals; and
//! [`thermometry`] covers sideband/Rabi temperature diagnostics.
//!
//! Unit conventions are documented in [`units`]: all detunings, Rabi
//! frequencies, linewidths and trap frequencies are plain MHz, times are µs,
//! and factors of 2π appear only where absolute scales enter (Lamb-Dicke
//! factors, ion-string length scales).

pub mod bloch;
pub mod config;
pub mod csvio;
pub mod error;
pub mod ionstring;
pub mod numeric;
pub mod ratecool;
pub mod runner;
pub mod scheme;
pub mod thermometry;
pub mod trajectory;
pub mod trap;
pub mod units;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
