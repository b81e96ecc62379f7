//! Monte Carlo and grid verification of the stochastic-quantization picture
//! of a relativistic scalar electron.

pub mod checks;
pub mod density;
pub mod error;
pub mod spacetime;
pub mod stochastic;
pub mod wavefunction;

pub mod cli;

pub use error::{Error, Result};
