//! Symbolic and numeric tools for optomechanical probes of deformed
//! canonical commutators.

pub mod algebra;
pub mod designer;
pub mod error;
pub mod loops;
pub mod meanfield;
pub mod oracle;
pub mod params;
pub mod precision;
pub mod robustness;

pub use error::{Error, Result};
