//! Probability of DMP visiting each set, and the expectations built on it.
//!
//! DMP stops at S when the powers of S fit the budget, with probability
//! `f(S)`. Otherwise it drops the member with the largest power. The chance
//! of reaching S is pushed down from `g(S0) = 1`:
//! `g(S) = sum_{j not in S} g(S + j) (1 - f(S + j)) Pr(j has the max power in S + j)`.
//! Successive steps are treated as independent, as are the powers within a
//! set. Sets are bitmasks over at most [`RECURSION_GUARD`] users.

use super::cf::rate_ccdf;
use super::gamma::{power_fit, sum_power_fit, PowerLaw};
use super::quad::{integrate_pieces, Tolerance};
use super::Mode;
use crate::channel::Geometry;
use crate::model::NetworkConfig;
use crate::{Error, Result};

/// Largest K for the exact recursions (2^K sets).
pub const RECURSION_GUARD: usize = 10;

/// `f(S)`: probability that the member powers fit `budget`, from the
/// moment-matched law of their sum.
pub fn prob_feasible(members: &[PowerLaw], budget: f64) -> Result<f64> {
    if !(budget > 0.0) {
        return Err(Error::Domain(format!("budget must be positive (got {budget})")));
    }
    Ok(sum_power_fit(members)?.cdf(budget))
}

/// Probability that member `j` needs the largest power,
/// `int pdf_j(x) prod_{i != j} cdf_i(x) dx`. Between equal point masses
/// the later member wins, as in DMP.
pub fn max_prob(members: &[PowerLaw], j: usize) -> Result<f64> {
    if j >= members.len() {
        return Err(Error::Usage(format!("member {j} of a {}-member set", members.len())));
    }
    if members.len() == 1 {
        return Ok(1.0);
    }
    let others = || members.iter().enumerate().filter(move |&(i, _)| i != j);
    match members[j] {
        PowerLaw::Point(p) => Ok(others()
            .map(|(i, law)| match *law {
                PowerLaw::Gamma(g) => g.cdf(p),
                PowerLaw::Point(q) => f64::from(u8::from(q < p || (q == p && i < j))),
            })
            .product()),
        PowerLaw::Gamma(g) => {
            let (mean, sd) = (g.mean(), g.variance().sqrt());
            let upper = mean + 50.0 * sd;
            let mut points = vec![0.0, upper];
            for k in [-2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0] {
                points.push(mean + k * sd);
            }
            for (_, law) in others() {
                match law {
                    PowerLaw::Point(q) => points.push(*q),
                    PowerLaw::Gamma(o) => points.push(o.mean()),
                }
            }
            points.retain(|&p| (0.0..=upper).contains(&p));
            points.sort_by(f64::total_cmp);
            points.dedup();
            let integrand = |x: f64| g.pdf(x) * others().map(|(_, law)| law.cdf(x)).product::<f64>();
            let tol = Tolerance { abs: 1e-12, rel: 1e-9, max_evals: 100_000 };
            let est = integrate_pieces(integrand, &points, tol)?;
            Ok(est.value.clamp(0.0, 1.0))
        }
    }
}

/// `P'(S+ \ {j}) = (1 - f(S+)) Pr(j has the max power in S+)`.
pub fn prob_drop(members: &[PowerLaw], j: usize, budget: f64) -> Result<f64> {
    if members.len() < 2 {
        return Err(Error::Usage("dropping needs at least two members".into()));
    }
    Ok((1.0 - prob_feasible(members, budget)?) * max_prob(members, j)?)
}

fn members_of(mask: usize, users: usize) -> Vec<usize> {
    (0..users).filter(|k| mask & (1 << k) != 0).collect()
}

pub fn mask_of(set: &[usize]) -> usize {
    set.iter().fold(0, |m, &k| m | (1 << k))
}

/// `f(S)` and `g(S)` for every subset of the K users.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachTable {
    pub users: usize,
    pub mode: Mode,
    pub budget: f64,
    /// Member power laws per mask, in SU order.
    pub laws: Vec<Vec<PowerLaw>>,
    /// `f(S)`; unused for the empty set.
    pub feasible: Vec<f64>,
    /// `g(S)`; `reach[0]` is the chance DMP empties the set.
    pub reach: Vec<f64>,
}

impl ReachTable {
    pub fn build(config: &NetworkConfig, geometry: &Geometry, mode: Mode) -> Result<ReachTable> {
        let k = geometry.users();
        if k > RECURSION_GUARD {
            return Err(Error::TooManyUsers { what: "exact analysis", users: k, guard: RECURSION_GUARD });
        }
        if k == 0 {
            return Err(Error::EmptySet);
        }
        let budget = config.budget();
        let n = 1usize << k;
        let mut laws = vec![Vec::new(); n];
        let mut feasible = vec![1.0; n];
        for mask in 1..n {
            let set = members_of(mask, k);
            laws[mask] = set
                .iter()
                .map(|&u| Ok(power_fit(u, set.len(), mode, config, geometry)?.power()))
                .collect::<Result<Vec<_>>>()?;
            feasible[mask] = prob_feasible(&laws[mask], budget)?;
        }

        let mut order: Vec<usize> = (1..n).collect();
        order.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));
        let mut reach = vec![0.0; n];
        reach[n - 1] = 1.0;
        for mask in order {
            let carry = reach[mask] * (1.0 - feasible[mask]);
            if carry <= 0.0 {
                continue;
            }
            let set = members_of(mask, k);
            if set.len() == 1 {
                reach[0] += carry;
                continue;
            }
            for (j, &u) in set.iter().enumerate() {
                reach[mask & !(1 << u)] += carry * max_prob(&laws[mask], j)?;
            }
        }
        Ok(ReachTable { users: k, mode, budget, laws, feasible, reach })
    }

    pub fn reach_prob(&self, set: &[usize]) -> f64 {
        self.reach[mask_of(set)]
    }

    /// Probability DMP ends at exactly this set, `f(S) g(S)`.
    pub fn end_prob(&self, mask: usize) -> f64 {
        if mask == 0 {
            self.reach[0]
        } else {
            self.feasible[mask] * self.reach[mask]
        }
    }

    /// `sum_{|S| = c} g(S)`.
    pub fn cardinality_mass(&self, c: usize) -> f64 {
        (0..self.reach.len()).filter(|m| m.count_ones() as usize == c).map(|m| self.reach[m]).sum()
    }

    pub fn expected_selected(&self) -> f64 {
        (1..self.reach.len()).map(|m| m.count_ones() as f64 * self.end_prob(m)).sum()
    }

    pub fn expected_satisfied(&self, config: &NetworkConfig, geometry: &Geometry) -> Result<f64> {
        let mut total = 0.0;
        for mask in 1..self.reach.len() {
            let w = self.end_prob(mask);
            if w < 1e-15 {
                continue;
            }
            let set = members_of(mask, self.users);
            for &k in &set {
                total += w * rate_ccdf(k, &set, geometry.rate_targets[k], self.mode, config, geometry)?;
            }
        }
        Ok(total)
    }

    /// `E[I_l]`. The leakage through each beam is `sigma_Delta2` on average
    /// for every PR, so the value does not depend on `l`.
    pub fn expected_interference(&self, config: &NetworkConfig) -> f64 {
        (1..self.reach.len())
            .map(|m| {
                let power: f64 = self.laws[m].iter().map(PowerLaw::mean).sum();
                self.end_prob(m) * power * config.sigma_cap_delta2
            })
            .sum()
    }
}

/// `g(S)` under `mode`.
pub fn reach_prob(set: &[usize], config: &NetworkConfig, geometry: &Geometry, mode: Mode) -> Result<f64> {
    Ok(ReachTable::build(config, geometry, mode)?.reach_prob(set))
}

/// `E[K*]`.
pub fn expected_selected(config: &NetworkConfig, geometry: &Geometry, mode: Mode) -> Result<f64> {
    Ok(ReachTable::build(config, geometry, mode)?.expected_selected())
}

/// `E[K**]`.
pub fn expected_satisfied(config: &NetworkConfig, geometry: &Geometry, mode: Mode) -> Result<f64> {
    ReachTable::build(config, geometry, mode)?.expected_satisfied(config, geometry)
}

/// `E[I_l]` for PR `l`.
pub fn expected_interference(l: usize, config: &NetworkConfig, geometry: &Geometry, mode: Mode) -> Result<f64> {
    if l >= geometry.primary_pairs() {
        return Err(Error::Usage(format!("PR {l} of {}", geometry.primary_pairs())));
    }
    Ok(ReachTable::build(config, geometry, mode)?.expected_interference(config))
}

/// All closed-form predictions for one geometry and mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mode: Mode,
    pub expected_selected: f64,
    pub expected_satisfied: f64,
    /// One entry per PR.
    pub expected_interference: Vec<f64>,
}

impl Prediction {
    pub fn compute(config: &NetworkConfig, geometry: &Geometry, mode: Mode) -> Result<Prediction> {
        let table = ReachTable::build(config, geometry, mode)?;
        let il = table.expected_interference(config);
        Ok(Prediction {
            mode,
            expected_selected: table.expected_selected(),
            expected_satisfied: table.expected_satisfied(config, geometry)?,
            expected_interference: vec![il; geometry.primary_pairs()],
        })
    }
}
