//! Process-tensor simulation of multi-time correlation functions and optical
//! spectra for a three-level system coupled to an Ohmic bath.

pub mod bath;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod master_equations;
pub mod process_tensor;
pub mod quadrature;
pub mod spectroscopy;
pub mod system;

pub use error::{Error, Result};
