//! Random-beamforming initial access in mmWave cellular networks.
//!
//! Two engines evaluate the same system: [`analytic`] integrates the
//! stochastic-geometry expressions for detection failure, and [`sim`] runs
//! Monte Carlo cell search over sampled PPP networks. [`latency`] turns
//! failure probabilities into expected access and transmission delays.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod antenna;
pub mod channel;
pub mod dataplane;
pub mod error;
pub mod latency;
pub mod network;
pub mod params;
pub mod quadrature;
pub mod sim;

pub use error::{Error, Result};
pub use params::{BlockageMode, FrameTiming, SystemParams};
