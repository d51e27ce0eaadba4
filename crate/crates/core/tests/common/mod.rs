//! The K = 4 desk instance shared by the Monte Carlo checks.
//!
//! Fixed node positions without shadowing. Every SU has a primary
//! transmitter about 1 km away, so reverse interference is comparable to
//! the noise floor, and the two PRs sit close to the SBS, where the
//! estimate of the PR channel is accurate. With R0 = 1.8 the full set is
//! infeasible in roughly one block out of three, so DMP drops users without
//! collapsing the set.

#![allow(dead_code)]

use cogmimo_core::channel::Geometry;
use cogmimo_core::{NetworkConfig, RateTargets};

pub const DESK_R0: f64 = 1.8;

pub fn desk() -> (NetworkConfig, Geometry) {
    let mut config = NetworkConfig::reference(64, 4, 2);
    config.shadow_sigma_db = 0.0;
    config.rate_targets = RateTargets::Common(DESK_R0);
    config.seed = 20_240_601;
    let geometry = Geometry::from_positions(
        &config,
        vec![(500.0, 0.0), (0.0, 800.0), (-1000.0, 0.0), (0.0, -1200.0)],
        vec![(900.0, 900.0), (-1000.0, -1000.0)],
        vec![(200.0, 200.0), (-250.0, 100.0)],
        vec![DESK_R0; 4],
    )
    .expect("desk geometry matches its config");
    (config, geometry)
}

/// The desk config with the budget lifted so that `S0` is always kept.
/// Only the budget changes; error variances and margins stay as they are.
pub fn unbounded(config: &NetworkConfig) -> NetworkConfig {
    let mut c = config.clone();
    c.eps1 = 0.0;
    c.sbs_power = 1e12;
    c
}
