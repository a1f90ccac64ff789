//! Noise and sensitivity spectra of an optomechanical force sensor whose
//! mechanical mode couples to a structured (non-Markovian) bath.
//!
//! Frequencies are angular (rad/s) throughout. The mechanical frequency
//! `omega_m` sets the natural scale; most tests and bundled configs use
//! `omega_m = 1` so that every quantity reads directly in units of it.

pub mod bath;
pub mod cli;
pub mod error;
pub mod grid;
pub mod homodyne;
pub mod quadrature;
pub mod response;
pub mod sensing;
pub mod timedomain;

pub use error::{Error, Result};
