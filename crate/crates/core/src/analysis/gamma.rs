//! Gamma laws for QoS powers.
//!
//! The power needed by SU k in a set S is `P = gamma * X` with
//! `X = sigma_w2 + eps2 + sum_l Pp |h_lk|^2` and the effective gain replaced
//! by its mean, `gamma = (2^R0_k - 1) / ((beta_k + sigma_delta2)(M - |S| - L + 1))`.
//! X is a constant plus a sum of exponentials; it is fitted by a Gamma law
//! matching mean and variance. Without primary pairs X is a constant.

use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use super::Mode;
use crate::channel::Geometry;
use crate::model::NetworkConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl GammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!(
                "Gamma law needs positive finite shape and scale (got {shape}, {scale})"
            )));
        }
        Ok(GammaParams { shape, scale })
    }

    /// Moment-matched law with the given mean and variance.
    pub fn from_moments(mean: f64, variance: f64) -> Result<Self> {
        GammaParams::new(mean * mean / variance, variance / mean)
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x.is_infinite() {
            1.0
        } else {
            gamma_lr(self.shape, x / self.scale)
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else if x.is_infinite() {
            0.0
        } else {
            gamma_ur(self.shape, x / self.scale)
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x == 0.0 {
            return match self.shape.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => 1.0 / self.scale,
                _ => 0.0,
            };
        }
        let z = x / self.scale;
        ((self.shape - 1.0) * z.ln() - z - ln_gamma(self.shape)).exp() / self.scale
    }
}

/// A nonnegative random power: Gamma distributed, or deterministic when
/// there is no primary interference to randomize it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerLaw {
    Gamma(GammaParams),
    Point(f64),
}

impl PowerLaw {
    pub fn mean(&self) -> f64 {
        match self {
            PowerLaw::Gamma(g) => g.mean(),
            PowerLaw::Point(p) => *p,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            PowerLaw::Gamma(g) => g.variance(),
            PowerLaw::Point(_) => 0.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        self.variance() + self.mean().powi(2)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            PowerLaw::Gamma(g) => g.cdf(x),
            PowerLaw::Point(p) => f64::from(u8::from(x >= *p)),
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        match self {
            PowerLaw::Gamma(g) => g.sf(x),
            PowerLaw::Point(p) => f64::from(u8::from(x <= *p)),
        }
    }

    /// Law of `factor * self`, `factor > 0`.
    pub fn scaled(&self, factor: f64) -> PowerLaw {
        match self {
            PowerLaw::Gamma(g) => PowerLaw::Gamma(GammaParams { shape: g.shape, scale: g.scale * factor }),
            PowerLaw::Point(p) => PowerLaw::Point(p * factor),
        }
    }
}

/// Law of the impairment `X` seen by SU k plus the multiplier `gamma`
/// turning it into the QoS power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub impairment: PowerLaw,
    pub gamma: f64,
}

impl PowerFit {
    /// `P_k ~ Gamma(kappa_p, gamma * theta_p)`, or a point mass.
    pub fn power(&self) -> PowerLaw {
        self.impairment.scaled(self.gamma)
    }
}

/// Moment-matched law of `X = sigma_w2 + eps2 + sum_l Pp |h_lk|^2`.
pub fn impairment_law(k: usize, config: &NetworkConfig, geometry: &Geometry) -> PowerLaw {
    let floor = config.noise + config.eps2;
    let terms: Vec<f64> = geometry.pt_su_beta.iter().map(|row| config.pt_power * row[k]).collect();
    let sum: f64 = terms.iter().sum();
    let sum_sq: f64 = terms.iter().map(|a| a * a).sum();
    if sum_sq == 0.0 {
        return PowerLaw::Point(floor + sum);
    }
    let mean = floor + sum;
    PowerLaw::Gamma(GammaParams { shape: mean * mean / sum_sq, scale: sum_sq / mean })
}

/// `gamma = (2^R0_k - 1) / ((beta_k + sigma_delta2)(M - n - L + 1))` for `n`
/// co-scheduled SUs.
pub fn gamma_multiplier(k: usize, co_scheduled: usize, config: &NetworkConfig, geometry: &Geometry) -> Result<f64> {
    let dof = config.antennas as i64 - co_scheduled as i64 - config.primary_pairs as i64 + 1;
    if dof < 1 {
        return Err(Error::Domain(format!(
            "M - |S| - L + 1 = {dof} leaves no degrees of freedom (M = {}, |S| = {co_scheduled}, L = {})",
            config.antennas, config.primary_pairs
        )));
    }
    let r0 = geometry.rate_targets[k];
    Ok((r0.exp2() - 1.0) / ((geometry.su_beta[k] + config.sigma_delta2) * dof as f64))
}

/// Gamma fit of the QoS power of SU `k` when it belongs to a set of
/// `set_size` users, under `mode`.
pub fn power_fit(
    k: usize,
    set_size: usize,
    mode: Mode,
    config: &NetworkConfig,
    geometry: &Geometry,
) -> Result<PowerFit> {
    let n = mode.effective_size(set_size, geometry.users());
    Ok(PowerFit { impairment: impairment_law(k, config, geometry), gamma: gamma_multiplier(k, n, config, geometry)? })
}

/// Moment-matched law of the sum of independent member powers. Point
/// masses contribute mean only; an all-deterministic sum stays a point.
pub fn sum_power_fit(members: &[PowerLaw]) -> Result<PowerLaw> {
    if members.is_empty() {
        return Err(Error::EmptySet);
    }
    let mean: f64 = members.iter().map(PowerLaw::mean).sum();
    let variance: f64 = members.iter().map(PowerLaw::variance).sum();
    if variance == 0.0 {
        return Ok(PowerLaw::Point(mean));
    }
    Ok(PowerLaw::Gamma(GammaParams::from_moments(mean, variance)?))
}

/// `Pr(P_k^{S1} >= x) - Pr(P_k^{S2} >= x)` for `S2` a proper subset of `S1`,
/// both containing `k`, with beams recomputed per set.
pub fn dominance_cdf_gap(
    k: usize,
    set1: &[usize],
    set2: &[usize],
    x: f64,
    config: &NetworkConfig,
    geometry: &Geometry,
) -> Result<f64> {
    if !set1.contains(&k) || !set2.contains(&k) {
        return Err(Error::Usage(format!("SU {k} must belong to both sets")));
    }
    if set2.len() >= set1.len() || !set2.iter().all(|u| set1.contains(u)) {
        return Err(Error::Usage(format!("{set2:?} is not a proper subset of {set1:?}")));
    }
    let p1 = power_fit(k, set1.len(), Mode::WithUpdate, config, geometry)?.power();
    let p2 = power_fit(k, set2.len(), Mode::WithUpdate, config, geometry)?.power();
    Ok(p1.sf(x) - p2.sf(x))
}
