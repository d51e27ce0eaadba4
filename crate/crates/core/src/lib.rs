//! QoS-aware user selection and power allocation for a massive-MIMO secondary
//! base station sharing spectrum with licensed primary links (underlay
//! cognitive radio).
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the scenario configuration and unit conversions.
//! * [`channel`] samples cell geometry, Rayleigh channels and imperfect CSI.
//! * [`beamform`] computes zero-forcing beams on the estimated channels.
//! * [`alloc`] implements QoS-aware power allocation and water-filling.
//! * [`select`] runs DMP (with and without beam update), MDML and the
//!   exhaustive oracles, and scores a selection on the true channels.
//! * [`analysis`] evaluates the closed-form statistical predictions
//!   (Gamma power fits, rate CCDF by characteristic-function inversion,
//!   expected number of served users and expected interference).
//! * [`harness`] drives Monte Carlo campaigns and writes CSV output.

pub mod alloc;
pub mod analysis;
pub mod beamform;
pub mod channel;
mod error;
pub mod harness;
pub mod model;
pub mod select;

pub use error::{Error, Result};
pub use model::{NetworkConfig, RateTargets};

/// Complex baseband sample type used throughout.
pub type Cplx = num_complex::Complex64;
