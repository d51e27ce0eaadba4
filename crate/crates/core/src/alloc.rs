//! Power allocation for a fixed selected set.
//!
//! * QoS-aware allocation: the least power that meets each SU's target rate
//!   on its estimated SINR with margin,
//!   `P_k = (2^R0_k - 1)(sigma_w2 + I_k + eps2) / |h_hat_k^H v_k|^2`.
//! * Water-filling over equivalent gains
//!   `lambda_k = |h_hat_k^H v_k|^2 / (sigma_w2 + I_k + eps2)`, used by MDML.

use crate::model::NetworkConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOutcome {
    pub set: Vec<usize>,
    /// Watts, aligned with `set`.
    pub powers: Vec<f64>,
    pub total: f64,
    pub budget: f64,
    /// `total <= budget`.
    pub feasible: bool,
}

/// Noise-plus-interference-plus-margin seen by SU `user` in the rate
/// estimate.
fn impairment(config: &NetworkConfig, rev_interference: &[f64], user: usize) -> f64 {
    config.noise + rev_interference[user] + config.eps2
}

pub fn budget(config: &NetworkConfig) -> f64 {
    config.budget()
}

/// QoS-aware powers for `set` given each member's effective gain (aligned
/// with `set`). `rev_interference` and `targets` are indexed by SU.
pub fn qos_power(
    set: &[usize],
    gains: &[f64],
    rev_interference: &[f64],
    targets: &[f64],
    config: &NetworkConfig,
) -> Result<AllocationOutcome> {
    debug_assert_eq!(set.len(), gains.len());
    let powers = set
        .iter()
        .zip(gains)
        .map(|(&u, &gain)| {
            if !(gain > 0.0) {
                return Err(Error::InfinitePower { user: u });
            }
            Ok((targets[u].exp2() - 1.0) * impairment(config, rev_interference, u) / gain)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(outcome(set, powers, config.budget()))
}

pub(crate) fn outcome(set: &[usize], powers: Vec<f64>, budget: f64) -> AllocationOutcome {
    let total: f64 = powers.iter().sum();
    AllocationOutcome { set: set.to_vec(), total, budget, feasible: total <= budget, powers }
}

/// `lambda_k` for each member of `set` (aligned with `set`).
pub fn equivalent_gain(set: &[usize], gains: &[f64], rev_interference: &[f64], config: &NetworkConfig) -> Vec<f64> {
    set.iter().zip(gains).map(|(&u, &g)| g / impairment(config, rev_interference, u)).collect()
}

/// Water-filling over parallel channels with gains `lambdas` and total
/// power `budget`. Returns `(P_k, mu)` with `P_k = (mu - 1/lambda_k)^+` and
/// the active users summing exactly to the budget.
///
/// Users with `lambda_k = 0` never become active.
pub fn waterfill(lambdas: &[f64], budget: f64) -> Result<(Vec<f64>, f64)> {
    if lambdas.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::Domain(format!("water-filling budget must be positive (got {budget})")));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::Domain("equivalent gains must be finite and non-negative".into()));
    }
    if lambdas.iter().all(|&l| l == 0.0) {
        return Err(Error::Domain("all equivalent gains are zero".into()));
    }
    let mut floors: Vec<f64> = lambdas.iter().map(|&l| if l > 0.0 { 1.0 / l } else { f64::INFINITY }).collect();
    floors.sort_by(f64::total_cmp);

    // Grow the active set while the next floor lies strictly below the
    // water level it would produce.
    let mut level = budget + floors[0];
    let mut acc = floors[0];
    for (n, &floor) in floors.iter().enumerate().skip(1) {
        if !(floor < level) {
            break;
        }
        let candidate = (budget + acc + floor) / (n + 1) as f64;
        if !(floor < candidate) {
            break;
        }
        acc += floor;
        level = candidate;
    }
    let powers = lambdas.iter().map(|&l| if l > 0.0 { (level - 1.0 / l).max(0.0) } else { 0.0 }).collect();
    Ok((powers, level))
}

/// Estimated sum rate `sum_k log2(1 + P_k lambda_k)`.
pub fn sum_rate(powers: &[f64], lambdas: &[f64]) -> f64 {
    powers.iter().zip(lambdas).map(|(p, l)| (1.0 + p * l).log2()).sum()
}
