//! Zeno dragging, strobed and continuous measurement, and complex absorbing
//! potentials on small Hilbert spaces.

pub mod cap;
pub mod error;
pub mod generators;
pub mod harness;
pub mod metrics;
pub mod operators;
pub mod oracle;
pub mod rng;
pub mod sme;
pub mod spectral;
pub mod state;
pub mod strobe;
pub mod testing;

pub use error::{Error, Result};
