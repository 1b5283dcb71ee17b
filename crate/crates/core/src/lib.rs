//! Finite-time hyperbolicity diagnostics for linear and nonlinear processes.

pub mod cli;
pub mod emit;
pub mod error;
pub mod ftle;
pub mod geometry;
pub mod nonlinear;
pub mod process;
pub mod rates;
pub mod spectral;
pub mod timeset;

pub use error::{Error, Result};
