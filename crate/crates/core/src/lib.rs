//! Time-reversal beamforming and power allocation for two-tier
//! macro/femto networks.

pub mod beamform;
pub mod channel;
pub mod error;
pub mod harness;
pub mod linops;
pub mod power;
pub mod robust;
pub mod sinr;

pub use error::{Error, Result, Stage};
