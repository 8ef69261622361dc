//! Learned enhanced split-step Fourier digital backpropagation.

pub mod dbp;
pub mod dsp;
pub mod error;
pub mod exp;
pub mod fiber;
pub mod learn;
pub mod seed;
pub mod txrx;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
