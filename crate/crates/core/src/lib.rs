//! Simulation of a MIMO receiver in which M antennas share one high-rate ADC
//! through a switched combiner, and of the cross-talk its decimation filter
//! introduces.

pub mod cost;
pub mod crosstalk;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod ofdm;
pub mod signal;

pub use error::{Error, Result};
