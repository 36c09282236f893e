//! Time-hopping optical CDMA access network simulator.
//!
//! Logical layer: keyed slot hopping ([`prbs`]), Bloom-style K-slot
//! repetition over a Z channel ([`hopcode`]), Reed-Solomon/LDPC coding
//! ([`ecc`]) and multi-ONU Monte Carlo ([`macsim`]). Physical layer: star
//! network waveform simulation with EDFA and receiver noise ([`optics`]).

pub mod cli;
pub mod ecc;
pub mod error;
pub mod hopcode;
pub mod macsim;
pub mod optics;
pub mod prbs;
pub mod report;

pub use error::{Error, Result};
