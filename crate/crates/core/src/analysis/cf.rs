//! Achieved-rate CCDF by characteristic-function inversion.
//!
//! SU k reaches rate y iff `sum_l Z_lk + Z_k <= zeta_y`, where
//! `Z_lk = (1 - C_y) Pp |h_lk|^2` is exponential with signed scale
//! `(1 - C_y) Pp beta_lk` and `Z_k`, the leakage from co-scheduled beams
//! through the CSI error, is fitted by a Gamma law. The CDF of the sum is
//! recovered from the product of characteristic functions with the
//! Gil-Pelaez formula
//! `F(x) = 1/2 - (1/pi) int_0^inf Im[e^{-itx} phi(t)] / t dt`.

use std::f64::consts::PI;

use super::gamma::power_fit;
use super::quad::{integrate, Tolerance};
use super::Mode;
use crate::channel::Geometry;
use crate::model::NetworkConfig;
use crate::{Cplx, Error, Result};

/// Tail mass below which the CDF is reported as exactly 0 or 1.
const NEGLIGIBLE_TAIL: f64 = 1e-12;
/// Truncation target for the inversion integral.
const TAIL_TARGET: f64 = 1e-10;
const MAX_PANELS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfKind {
    /// Gamma factor `(1 - i theta t)^-kappa`.
    GammaPower,
    /// Exponential factor `(1 - i theta t)^-1`; theta may be negative.
    UnitExponential,
}

/// One independent summand, represented by its characteristic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfTerm {
    pub kind: CfKind,
    pub theta: f64,
    pub kappa: f64,
}

impl CfTerm {
    pub fn gamma(kappa: f64, theta: f64) -> CfTerm {
        CfTerm { kind: CfKind::GammaPower, theta, kappa }
    }

    pub fn exponential(theta: f64) -> CfTerm {
        CfTerm { kind: CfKind::UnitExponential, theta, kappa: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        self.kappa * self.theta
    }

    /// `(1 - i theta t)^-kappa`.
    pub fn cf(&self, t: f64) -> Cplx {
        let (modulus, phase) = self.polar(t);
        Cplx::from_polar(modulus, phase)
    }

    fn polar(&self, t: f64) -> (f64, f64) {
        let u = self.theta * t;
        ((1.0 + u * u).powf(-0.5 * self.kappa), self.kappa * u.atan())
    }

    fn log_mgf(&self, s: f64) -> f64 {
        -self.kappa * (1.0 - self.theta * s).ln()
    }
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    fa.min(fb)
}

/// Chernoff bounds `(Pr(W <= x), Pr(W >= x))` for unit-normalized terms.
fn chernoff(terms: &[CfTerm], x: f64) -> (f64, f64) {
    let log_bound = |s: f64| terms.iter().map(|t| t.log_mgf(s)).sum::<f64>() - s * x;
    let lo = terms.iter().filter(|t| t.theta < 0.0).map(|t| 1.0 / t.theta).fold(-1e6, f64::max);
    let hi = terms.iter().filter(|t| t.theta > 0.0).map(|t| 1.0 / t.theta).fold(1e6, f64::min);
    let shrink = 1.0 - 1e-9;
    let lower = golden_min(log_bound, lo * shrink, 0.0).min(0.0).exp();
    let upper = golden_min(log_bound, 0.0, hi * shrink).min(0.0).exp();
    (lower, upper)
}

/// `Pr(sum of terms <= x)` for independent summands.
pub fn gil_pelaez_cdf(terms: &[CfTerm], x: f64) -> Result<f64> {
    let terms: Vec<CfTerm> = terms.iter().copied().filter(|t| t.theta != 0.0).collect();
    if terms.iter().any(|t| !(t.kappa > 0.0) || !t.theta.is_finite() || !t.kappa.is_finite()) {
        return Err(Error::Domain("CF terms need positive shape and finite scale".into()));
    }
    if terms.is_empty() {
        return Ok(if x >= 0.0 { 1.0 } else { 0.0 });
    }
    if terms.iter().all(|t| t.theta > 0.0) && x <= 0.0 {
        return Ok(0.0);
    }
    if terms.iter().all(|t| t.theta < 0.0) && x >= 0.0 {
        return Ok(1.0);
    }

    let scale = terms.iter().map(|t| t.theta.abs()).fold(0.0, f64::max);
    let unit: Vec<CfTerm> = terms.iter().map(|t| CfTerm { theta: t.theta / scale, ..*t }).collect();
    let x = x / scale;
    if !x.is_finite() {
        return Err(Error::Domain("CDF argument overflows after normalization".into()));
    }

    let (lower, upper) = chernoff(&unit, x);
    if lower < NEGLIGIBLE_TAIL {
        return Ok(0.0);
    }
    if upper < NEGLIGIBLE_TAIL {
        return Ok(1.0);
    }

    let polar = |t: f64| {
        unit.iter().fold((1.0, 0.0), |(m, p), term| {
            let (tm, tp) = term.polar(t);
            (m * tm, p + tp)
        })
    };
    let integrand = |t: f64| {
        let (m, p) = polar(t);
        m * (p - t * x).sin() / t
    };
    // Decay exponent of |phi| at t, and phase speed of the integrand.
    let decay = |t: f64| {
        unit.iter()
            .map(|u| {
                let v = u.theta * t;
                u.kappa * v * v / (1.0 + v * v)
            })
            .sum::<f64>()
    };
    let speed =
        |t: f64| (x - unit.iter().map(|u| u.kappa * u.theta / (1.0 + (u.theta * t).powi(2))).sum::<f64>()).abs();
    let omega = x.abs() + unit.iter().map(|u| u.kappa * u.theta.abs()).sum::<f64>();
    let max_width = 4.0 * PI / omega;
    let tol = Tolerance { abs: 1e-14, rel: 1e-10, max_evals: 50_000 };

    let mut a = 0.0f64;
    let mut total = 0.0;
    for _ in 0..MAX_PANELS {
        let b = a + a.max(0.25).min(max_width);
        total += integrate(&integrand, a, b, tol)?.value;
        a = b;
        let modulus = polar(a).0;
        let smooth = modulus / decay(a);
        let oscillating = 2.0 * modulus / (a * speed(a));
        if smooth.min(oscillating) < TAIL_TARGET {
            return Ok((0.5 - total / PI).clamp(0.0, 1.0));
        }
    }
    Err(Error::Numeric(format!(
        "characteristic-function inversion did not converge by t = {a:e} (|phi| = {:e})",
        polar(a).0
    )))
}

/// The ingredients of the rate CCDF for one SU in one set.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCcdfModel {
    pub c_y: f64,
    pub zeta: f64,
    pub terms: Vec<CfTerm>,
}

impl RateCcdfModel {
    /// True when `zeta < 0` yet some summand can be negative: the regime
    /// where the probability is not trivially zero.
    pub fn signed_negative_threshold(&self) -> bool {
        self.zeta < 0.0 && self.terms.iter().any(|t| t.theta < 0.0)
    }
}

pub fn rate_ccdf_model(
    k: usize,
    set: &[usize],
    y: f64,
    mode: Mode,
    config: &NetworkConfig,
    geometry: &Geometry,
) -> Result<RateCcdfModel> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("rate threshold must be positive (got {y})")));
    }
    if !set.contains(&k) {
        return Err(Error::Usage(format!("SU {k} is not in set {set:?}")));
    }
    let beta = geometry.su_beta[k];
    let sd = config.sigma_delta2;
    let c_y = beta / (beta + sd) * (geometry.rate_targets[k].exp2() - 1.0) / (y.exp2() - 1.0);
    let zeta = c_y * (config.noise + config.eps2) - config.noise;

    let mut terms: Vec<CfTerm> = geometry
        .pt_su_beta
        .iter()
        .map(|row| CfTerm::exponential((1.0 - c_y) * config.pt_power * row[k]))
        .filter(|t| t.theta != 0.0)
        .collect();

    if sd > 0.0 {
        let mut mean = 0.0;
        let mut var = 0.0;
        for &j in set.iter().filter(|&&j| j != k) {
            let p = power_fit(j, set.len(), mode, config, geometry)?.power();
            let m = p.mean();
            mean += sd * m;
            var += sd * sd * (2.0 * p.second_moment() - m * m);
        }
        if mean > 0.0 {
            terms.push(CfTerm::gamma(mean * mean / var, var / mean));
        }
    }
    Ok(RateCcdfModel { c_y, zeta, terms })
}

/// `Pr(R_k^S >= y)` for SU `k` in set `set`.
pub fn rate_ccdf(
    k: usize,
    set: &[usize],
    y: f64,
    mode: Mode,
    config: &NetworkConfig,
    geometry: &Geometry,
) -> Result<f64> {
    if config.sigma_delta2 == 0.0 && y == geometry.rate_targets[k] && set.contains(&k) {
        return Ok(1.0);
    }
    let model = rate_ccdf_model(k, set, y, mode, config, geometry)?;
    gil_pelaez_cdf(&model.terms, model.zeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::gamma::tests::{geometry, series_gamma_lr};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1, Gamma};

    /// Exact CDF of `sum_i theta_i E_i` with unit exponentials and
    /// distinct nonzero signed scales, by partial fractions.
    fn hypoexponential_cdf(thetas: &[f64], x: f64) -> f64 {
        let mut total = 0.0;
        for (i, &ti) in thetas.iter().enumerate() {
            let c: f64 = thetas.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &tj)| ti / (ti - tj)).product();
            let f = if ti > 0.0 {
                if x > 0.0 {
                    1.0 - (-x / ti).exp()
                } else {
                    0.0
                }
            } else if x < 0.0 {
                (-x / ti).exp()
            } else {
                1.0
            };
            total += c * f;
        }
        total
    }

    #[test]
    fn single_exponential() {
        let t = [CfTerm::exponential(2.0)];
        for x in [0.1, 1.0, 2.0, 7.0] {
            let got = gil_pelaez_cdf(&t, x).unwrap();
            assert!((got - (1.0 - (-x / 2.0f64).exp())).abs() < 1e-8, "x={x} got {got}");
        }
    }

    #[test]
    fn matches_hypoexponential_oracle() {
        let cases: [&[f64]; 4] = [&[1.0, 0.4], &[1.0, -0.3], &[2e-13, -5e-14, 7e-14], &[-1.0, -0.2, 0.5, 0.05]];
        for thetas in cases {
            let terms: Vec<CfTerm> = thetas.iter().map(|&t| CfTerm::exponential(t)).collect();
            let s: f64 = thetas.iter().map(|t| t.abs()).sum();
            for frac in [-1.5, -0.4, -0.05, 0.0, 0.05, 0.3, 1.0, 2.5] {
                let x = frac * s;
                let got = gil_pelaez_cdf(&terms, x).unwrap();
                let want = hypoexponential_cdf(thetas, x);
                assert!((got - want).abs() < 1e-7, "{thetas:?} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn gamma_term_matches_incomplete_gamma() {
        for (k, x) in [(0.7, 0.4), (3.5, 2.0), (12.0, 15.0)] {
            let got = gil_pelaez_cdf(&[CfTerm::gamma(k, 1.0)], x).unwrap();
            assert!((got - series_gamma_lr(k, x)).abs() < 1e-7, "k={k} x={x}");
        }
    }

    #[test]
    fn degenerate_cases() {
        assert_eq!(gil_pelaez_cdf(&[], 0.0).unwrap(), 1.0);
        assert_eq!(gil_pelaez_cdf(&[], -1.0).unwrap(), 0.0);
        assert_eq!(gil_pelaez_cdf(&[CfTerm::exponential(1.0)], -0.5).unwrap(), 0.0);
        assert_eq!(gil_pelaez_cdf(&[CfTerm::exponential(-1.0)], 0.5).unwrap(), 1.0);
        assert_eq!(gil_pelaez_cdf(&[CfTerm::exponential(1.0)], 1e3).unwrap(), 1.0);
        assert!(gil_pelaez_cdf(&[CfTerm::gamma(0.0, 1.0)], 1.0).is_err());
    }

    #[test]
    fn monte_carlo_mixture() {
        let terms = [CfTerm::gamma(2.3, 0.7), CfTerm::exponential(-0.9), CfTerm::exponential(0.4)];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Gamma::new(2.3, 0.7).unwrap();
        let n = 200_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let e1: f64 = Exp1.sample(&mut rng);
                let e2: f64 = Exp1.sample(&mut rng);
                g.sample(&mut rng) - 0.9 * e1 + 0.4 * e2
            })
            .collect();
        for x in [-1.0, 0.0, 1.0, 2.0, 4.0] {
            let emp = samples.iter().filter(|&&s| s <= x).count() as f64 / n as f64;
            let got = gil_pelaez_cdf(&terms, x).unwrap();
            assert!((got - emp).abs() < 5e-3, "x={x}: {got} vs {emp}");
        }
    }

    fn desk() -> (NetworkConfig, Geometry) {
        let c = NetworkConfig::reference(64, 3, 2);
        let g = geometry(vec![3e-11, 1e-11, 5e-12], vec![vec![5e-13, 1e-12, 2e-13], vec![2e-13, 3e-13, 8e-13]], 1.0);
        (c, g)
    }

    #[test]
    fn perfect_csi_at_target_is_certain() {
        let (mut c, g) = desk();
        c.sigma_delta2 = 0.0;
        c.eps2 = 0.0;
        assert_eq!(rate_ccdf(0, &[0, 1, 2], 1.0, Mode::WithUpdate, &c, &g).unwrap(), 1.0);
    }

    #[test]
    fn small_rates_are_certain() {
        let (c, g) = desk();
        let p = rate_ccdf(1, &[0, 1, 2], 1e-4, Mode::WithUpdate, &c, &g).unwrap();
        assert!(p > 1.0 - 1e-9, "{p}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let (c, g) = desk();
        assert!(rate_ccdf(0, &[0, 1], 0.0, Mode::WithUpdate, &c, &g).is_err());
        assert!(matches!(rate_ccdf(2, &[0, 1], 1.0, Mode::WithUpdate, &c, &g), Err(Error::Usage(_))));
    }

    #[test]
    fn leakage_term_moments() {
        let (c, g) = desk();
        let m = rate_ccdf_model(0, &[0, 1, 2], 1.5, Mode::WithUpdate, &c, &g).unwrap();
        let z = m.terms.iter().find(|t| t.kind == CfKind::GammaPower).unwrap();
        let mut mean = 0.0;
        let mut var = 0.0;
        for j in [1, 2] {
            let p = power_fit(j, 3, Mode::WithUpdate, &c, &g).unwrap().power();
            let (k, th) = match p {
                crate::analysis::PowerLaw::Gamma(q) => (q.shape, q.scale),
                _ => unreachable!(),
            };
            mean += c.sigma_delta2 * k * th;
            var += (c.sigma_delta2 * th).powi(2) * (2.0 * k * (k + 1.0) - k * k);
        }
        assert!((z.kappa * z.theta - mean).abs() <= 1e-12 * mean);
        assert!((z.kappa * z.theta * z.theta - var).abs() <= 1e-12 * var);
        assert_eq!(m.terms.len(), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn ccdf_nonincreasing_in_rate(y in 0.2f64..2.5, dy in 0.01f64..1.0, k in 0usize..3) {
                let (c, g) = desk();
                let a = rate_ccdf(k, &[0, 1, 2], y, Mode::WithUpdate, &c, &g).unwrap();
                let b = rate_ccdf(k, &[0, 1, 2], y + dy, Mode::WithUpdate, &c, &g).unwrap();
                prop_assert!(b <= a + 1e-7, "{} > {}", b, a);
            }
        }
    }
}
