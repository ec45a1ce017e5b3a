//! Sequential detection on one-bit quantized Gaussian data through
//! exponential-family approximations of the log-likelihood ratio.

pub mod binary;
pub mod cli;
pub mod error;
pub mod expfam;
pub mod gaussian;
pub mod linalg;
pub mod montecarlo;
pub mod orthant;
pub mod quadrature;
pub mod scenario;
pub mod sequential;
pub mod tuner;

pub use error::{Error, Result};
