//! Simulation of polarization-entangled photon pairs generated by spontaneous
//! four-wave mixing in a polarization-maintaining fiber that is cut at its
//! midpoint and re-spliced with a 90° axis offset.
//!
//! The pipeline runs from pump walk-off ([`fiber`]) through the scalar and
//! vector pair spectra ([`spectra`]), the two-photon polarization state
//! ([`state`]) and gated detector counting ([`counting`]) to fringe
//! visibility fits ([`fringe`]).

pub mod counting;
pub mod error;
pub mod fiber;
pub mod fringe;
pub mod spectra;
pub mod state;

pub use error::{Error, Result};
