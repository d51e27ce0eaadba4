//! User selection: DMP (with and without beam update), MDML, the exhaustive
//! oracles, and scoring a selection on the true channels.
//!
//! The greedy loops are written against a provider closure mapping a set to
//! per-member powers (DMP) or equivalent gains (MDML), so the same loop
//! serves the beamformed algorithms and hand-built power tables in tests.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::alloc::{self, AllocationOutcome};
use crate::beamform::{zf_vectors, BeamSet};
use crate::channel::{ChannelRealization, CsiView};
use crate::model::NetworkConfig;
use crate::{Error, Result};

/// Largest K accepted by [`exhaustive_optimal`].
pub const EXHAUSTIVE_GUARD: usize = 14;

/// Slack in bits/s/Hz when testing `R_k >= R0_k`. A user allocated exactly
/// its QoS power on a perfectly known channel sits on the boundary, and
/// rounding must not flip it.
pub const RATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dmp,
    DmpNvu,
    Mdml,
    Optimal,
    P2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Dmp, Algorithm::DmpNvu, Algorithm::Mdml, Algorithm::Optimal, Algorithm::P2];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Dmp => "dmp",
            Algorithm::DmpNvu => "dmp_nvu",
            Algorithm::Mdml => "mdml",
            Algorithm::Optimal => "optimal",
            Algorithm::P2 => "p2",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Algorithm> {
        Algorithm::ALL.into_iter().find(|a| a.tag() == tag)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub algorithm: Algorithm,
    /// Selected SUs in ascending order.
    pub set: Vec<usize>,
    /// Watts, aligned with `set`.
    pub powers: Vec<f64>,
    pub beams: BeamSet,
    pub iterations: usize,
    /// Removed SUs in removal order.
    pub dropped: Vec<usize>,
    pub budget: f64,
    pub feasible: bool,
}

impl SelectionOutcome {
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn cardinality(&self) -> usize {
        self.set.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceReport {
    /// bits/s/Hz, aligned with the selected set.
    pub achieved_rates: Vec<f64>,
    /// Inter-SU interference `sum_{j != k} P_j |h_k^H v_j|^2`, aligned with
    /// the selected set.
    pub inter_su_interference: Vec<f64>,
    /// K**: members meeting their target rate.
    pub satisfied_count: usize,
    /// Interference at each PR, watts.
    pub pr_interference: Vec<f64>,
    pub sum_power: f64,
}

impl PerformanceReport {
    pub fn max_pr_interference(&self) -> f64 {
        self.pr_interference.iter().cloned().fold(0.0, f64::max)
    }

    pub fn mean_pr_interference(&self) -> f64 {
        if self.pr_interference.is_empty() {
            0.0
        } else {
            self.pr_interference.iter().sum::<f64>() / self.pr_interference.len() as f64
        }
    }
}

/// Result of the generic drop loops.
#[derive(Debug, Clone, PartialEq)]
pub struct DropTrace {
    pub set: Vec<usize>,
    /// Provider output for the final set (powers for DMP, water-filled
    /// powers for MDML).
    pub powers: Vec<f64>,
    pub dropped: Vec<usize>,
}

/// Largest value, ties to the highest SU index.
fn argmax_high(set: &[usize], values: &[f64]) -> usize {
    (0..set.len()).max_by(|&a, &b| values[a].total_cmp(&values[b]).then(set[a].cmp(&set[b]))).expect("non-empty set")
}

/// Smallest value, ties to the highest SU index.
fn argmin_high(set: &[usize], values: &[f64]) -> usize {
    (0..set.len()).min_by(|&a, &b| values[a].total_cmp(&values[b]).then(set[b].cmp(&set[a]))).expect("non-empty set")
}

/// Drop the SU with the largest required power until the total fits the
/// budget. `powers_for` is evaluated on the initial set and after every
/// drop; it is never called on the empty set.
pub fn drop_max_power<F>(initial: &[usize], budget: f64, mut powers_for: F) -> Result<DropTrace>
where
    F: FnMut(&[usize]) -> Result<Vec<f64>>,
{
    let mut set = initial.to_vec();
    let mut dropped = Vec::new();
    let mut powers = if set.is_empty() { Vec::new() } else { powers_for(&set)? };
    while powers.iter().sum::<f64>() > budget {
        let i = argmax_high(&set, &powers);
        dropped.push(set.remove(i));
        if set.is_empty() {
            powers.clear();
            break;
        }
        powers = powers_for(&set)?;
    }
    Ok(DropTrace { set, powers, dropped })
}

/// MDML loop: tentatively drop the SU with the smallest equivalent gain
/// and keep the drop only if the water-filled sum rate strictly increases.
/// Returns the water-filled powers of the final set.
pub fn drop_min_lambda<F>(initial: &[usize], budget: f64, mut lambdas_for: F) -> Result<DropTrace>
where
    F: FnMut(&[usize]) -> Result<Vec<f64>>,
{
    if initial.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut set = initial.to_vec();
    let mut dropped = Vec::new();
    let mut lambdas = lambdas_for(&set)?;
    let (mut powers, _) = alloc::waterfill(&lambdas, budget)?;
    let mut rate = alloc::sum_rate(&powers, &lambdas);
    while set.len() > 1 {
        let i = argmin_high(&set, &lambdas);
        let mut candidate = set.clone();
        let removed = candidate.remove(i);
        let cand_lambdas = lambdas_for(&candidate)?;
        let (cand_powers, _) = alloc::waterfill(&cand_lambdas, budget)?;
        let cand_rate = alloc::sum_rate(&cand_powers, &cand_lambdas);
        if cand_rate > rate {
            set = candidate;
            lambdas = cand_lambdas;
            powers = cand_powers;
            rate = cand_rate;
            dropped.push(removed);
        } else {
            break;
        }
    }
    Ok(DropTrace { set, powers, dropped })
}

/// Beams and QoS powers for the full set `S0 = {0, .., K-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub beams: BeamSet,
    pub allocation: AllocationOutcome,
}

fn qos_for(
    csi: &CsiView,
    config: &NetworkConfig,
    targets: &[f64],
    set: &[usize],
) -> Result<(BeamSet, AllocationOutcome)> {
    let beams = zf_vectors(csi, set)?;
    let gains = beams.gains(csi);
    let allocation = alloc::qos_power(set, &gains, &csi.rev_interference, targets, config)?;
    Ok((beams, allocation))
}

pub fn initial_state(csi: &CsiView, config: &NetworkConfig, targets: &[f64]) -> Result<InitialState> {
    let all: Vec<usize> = (0..csi.users()).collect();
    let (beams, allocation) = qos_for(csi, config, targets, &all)?;
    Ok(InitialState { beams, allocation })
}

fn check_dims(csi: &CsiView, targets: &[f64]) -> Result<()> {
    if targets.len() != csi.users() {
        return Err(Error::Usage(format!("{} rate targets for {} SUs", targets.len(), csi.users())));
    }
    if csi.users() == 0 {
        return Err(Error::EmptySet);
    }
    Ok(())
}

/// Delete-SU-with-Maximum-Power. With `update_vectors` the beams and powers
/// are recomputed after every drop; without it the survivors keep their
/// `S0` beams and powers.
pub fn dmp(csi: &CsiView, config: &NetworkConfig, targets: &[f64], update_vectors: bool) -> Result<SelectionOutcome> {
    check_dims(csi, targets)?;
    let init = initial_state(csi, config, targets)?;
    dmp_from(&init, csi, config, targets, update_vectors)
}

/// [`dmp`] starting from a precomputed `S0` state.
pub fn dmp_from(
    init: &InitialState,
    csi: &CsiView,
    config: &NetworkConfig,
    targets: &[f64],
    update_vectors: bool,
) -> Result<SelectionOutcome> {
    let budget = config.budget();
    let s0 = &init.allocation.set;
    let (trace, beams) = if update_vectors {
        let mut last = init.beams.clone();
        let mut first = true;
        let trace = drop_max_power(s0, budget, |set| {
            if std::mem::take(&mut first) {
                return Ok(init.allocation.powers.clone());
            }
            let (beams, allocation) = qos_for(csi, config, targets, set)?;
            last = beams;
            Ok(allocation.powers)
        })?;
        let beams = if trace.set.is_empty() { BeamSet::empty(csi.antennas()) } else { last };
        (trace, beams)
    } else {
        let fixed = &init.allocation.powers;
        let trace = drop_max_power(s0, budget, |set| Ok(set.iter().map(|&u| fixed[u]).collect()))?;
        let beams = init.beams.restrict(&trace.set);
        (trace, beams)
    };
    let total: f64 = trace.powers.iter().sum();
    Ok(SelectionOutcome {
        algorithm: if update_vectors { Algorithm::Dmp } else { Algorithm::DmpNvu },
        iterations: trace.dropped.len(),
        set: trace.set,
        powers: trace.powers,
        beams,
        dropped: trace.dropped,
        budget,
        feasible: total <= budget,
    })
}

/// Modified Delete-Minimum-Lambda with water-filling powers. Members left
/// with zero power stay in the returned set.
pub fn mdml(csi: &CsiView, config: &NetworkConfig, targets: &[f64]) -> Result<SelectionOutcome> {
    check_dims(csi, targets)?;
    let budget = config.budget();
    let all: Vec<usize> = (0..csi.users()).collect();
    let mut cache: Vec<(Vec<usize>, BeamSet)> = Vec::with_capacity(2);
    let trace = drop_min_lambda(&all, budget, |set| {
        let beams = zf_vectors(csi, set)?;
        let lambdas = alloc::equivalent_gain(set, &beams.gains(csi), &csi.rev_interference, config);
        // Keep the accepted set's beams and the latest candidate's.
        cache.push((set.to_vec(), beams));
        if cache.len() > 2 {
            cache.remove(0);
        }
        Ok(lambdas)
    })?;
    let beams = match cache.into_iter().find(|(set, _)| *set == trace.set) {
        Some((_, b)) => b,
        None => zf_vectors(csi, &trace.set)?,
    };
    let total: f64 = trace.powers.iter().sum();
    Ok(SelectionOutcome {
        algorithm: Algorithm::Mdml,
        iterations: trace.dropped.len(),
        set: trace.set,
        powers: trace.powers,
        beams,
        dropped: trace.dropped,
        budget,
        feasible: total <= budget * (1.0 + 1e-12),
    })
}

/// Maximum-cardinality feasible set of P1 by enumeration: cardinalities
/// from K down, subsets in lexicographic order, first feasible wins.
pub fn exhaustive_optimal(csi: &CsiView, config: &NetworkConfig, targets: &[f64]) -> Result<SelectionOutcome> {
    check_dims(csi, targets)?;
    let k = csi.users();
    if k > EXHAUSTIVE_GUARD {
        return Err(Error::TooManyUsers { what: "exhaustive search", users: k, guard: EXHAUSTIVE_GUARD });
    }
    let budget = config.budget();
    for size in (1..=k).rev() {
        for set in (0..k).combinations(size) {
            let (beams, allocation) = qos_for(csi, config, targets, &set)?;
            if allocation.feasible {
                return Ok(SelectionOutcome {
                    algorithm: Algorithm::Optimal,
                    dropped: (0..k).filter(|u| !set.contains(u)).collect(),
                    iterations: k - size,
                    set,
                    powers: allocation.powers,
                    beams,
                    budget,
                    feasible: true,
                });
            }
        }
    }
    Ok(SelectionOutcome {
        algorithm: Algorithm::Optimal,
        set: Vec::new(),
        powers: Vec::new(),
        beams: BeamSet::empty(csi.antennas()),
        iterations: k,
        dropped: (0..k).collect(),
        budget,
        feasible: true,
    })
}

/// Longest feasible prefix of `powers` sorted ascending (ties by index).
/// This is a maximum-cardinality subset with sum within `budget`.
pub fn sorted_prefix(powers: &[f64], budget: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..powers.len()).collect();
    order.sort_by(|&a, &b| powers[a].total_cmp(&powers[b]).then(a.cmp(&b)));
    let mut total = 0.0;
    let mut take = 0;
    for &u in &order {
        total += powers[u];
        if total > budget {
            break;
        }
        take += 1;
    }
    let mut chosen = order[..take].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Problem P2: maximum cardinality with powers frozen at their `S0` values.
pub fn oracle_p2(csi: &CsiView, config: &NetworkConfig, targets: &[f64]) -> Result<SelectionOutcome> {
    check_dims(csi, targets)?;
    let init = initial_state(csi, config, targets)?;
    Ok(oracle_p2_from(&init, config))
}

pub fn oracle_p2_from(init: &InitialState, config: &NetworkConfig) -> SelectionOutcome {
    let budget = config.budget();
    let fixed = &init.allocation.powers;
    let set = sorted_prefix(fixed, budget);
    let k = fixed.len();
    SelectionOutcome {
        algorithm: Algorithm::P2,
        powers: set.iter().map(|&u| fixed[u]).collect(),
        beams: init.beams.restrict(&set),
        dropped: (0..k).filter(|u| !set.contains(u)).collect(),
        iterations: k - set.len(),
        set,
        budget,
        feasible: true,
    }
}

/// Rate predicted from an effective gain and an impairment margin:
/// `log2(1 + P g / (sigma_w2 + I_k + eps2))`.
pub fn estimated_rate(power: f64, gain: f64, noise: f64, rev_interference: f64, eps2: f64) -> f64 {
    (1.0 + power * gain / (noise + rev_interference + eps2)).log2()
}

/// Score a selection on the true channels.
pub fn evaluate(
    channels: &ChannelRealization,
    outcome: &SelectionOutcome,
    rev_interference: &[f64],
    config: &NetworkConfig,
    targets: &[f64],
) -> PerformanceReport {
    let v = &outcome.beams.vectors;
    let n = outcome.set.len();
    let l = channels.h_pr.ncols();
    let mut rates = Vec::with_capacity(n);
    let mut inter = Vec::with_capacity(n);
    let mut satisfied = 0;
    for (i, &k) in outcome.set.iter().enumerate() {
        let h = channels.h_su.column(k);
        let mut z = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            z += outcome.powers[j] * h.dotc(&v.column(j)).norm_sqr();
        }
        let signal = outcome.powers[i] * h.dotc(&v.column(i)).norm_sqr();
        let rate = (1.0 + signal / (config.noise + rev_interference[k] + z)).log2();
        if rate >= targets[k] - RATE_TOLERANCE {
            satisfied += 1;
        }
        rates.push(rate);
        inter.push(z);
    }
    let pr_interference = (0..l)
        .map(|p| {
            let h = channels.h_pr.column(p);
            (0..n).map(|i| outcome.powers[i] * h.dotc(&v.column(i)).norm_sqr()).sum()
        })
        .collect();
    PerformanceReport {
        achieved_rates: rates,
        inter_su_interference: inter,
        satisfied_count: satisfied,
        pr_interference,
        sum_power: outcome.total_power(),
    }
}
