//! Phase retrieval from (possibly eroded) autocorrelations: exact FFT
//! autocorrelation, Fienup's hybrid input-output algorithm, an MNIST-based
//! dataset generator, a small convolutional network trained in the
//! autocorrelation domain, and registration-invariant metrics.

pub mod correlation;
pub mod dataset;
pub mod eval;
pub mod error;
mod fft;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod retrieval;
pub mod seed;

pub use error::{Error, Result};
