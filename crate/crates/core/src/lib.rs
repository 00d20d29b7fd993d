//! Spectral shift function machinery on exactly computable rigged operator
//! models: sandwiched resolvents and their boundary values, the absolutely
//! continuous and singular parts of the spectral shift function, resonance
//! indices, stationary scattering matrices and eigenphase flow of unitary
//! paths.
#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod models;
pub mod numerics;
pub mod numkernel;
pub mod quad;
pub mod resolvent;
pub mod resonance;
pub mod scattering;
pub mod specflow;
pub mod ssf;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex<f64>;
