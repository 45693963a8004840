//! Simulation of a Rydberg-atom microwave receiver.
//!
//! A four-level ladder (probe, coupler, microwave) is solved in steady state,
//! averaged over the thermal velocity distribution of a vapour cell and swept
//! across a laser detuning to give EIT/Autler-Townes spectra. AM and FM
//! baseband signals carried by the microwave are then recovered from the
//! spectra alone: AM from the Autler-Townes splitting, FM from the height
//! asymmetry of the two Autler-Townes lines.

pub mod analysis;
pub mod doppler;
pub mod error;
pub mod ladder;
pub mod link;
pub mod modulation;
pub mod units;

pub use error::{Error, Result};
