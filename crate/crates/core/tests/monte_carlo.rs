//! Monte Carlo checks of the closed forms that back the analysis, at sizes
//! that keep the default test run short. The full-size versions live in the
//! acceptance target.

mod common;

use cogmimo_core::analysis::{power_fit, prob_drop, prob_feasible, Mode};
use cogmimo_core::channel::{channel_stream, corrupt_csi, sample_channels, sample_geometry, substream};
use cogmimo_core::harness::{sweep, Axis, CampaignPlan, SweepPoint};
use cogmimo_core::select::{dmp_from, initial_state, Algorithm};
use cogmimo_core::NetworkConfig;

#[test]
fn power_mean_at_reference_size() {
    let mut config = NetworkConfig::reference(128, 20, 4);
    config.seed = 41;
    let g = sample_geometry(&config, &mut substream(config.seed, 0, 0)).unwrap();
    let big = common::unbounded(&config);
    let n = 10_000;
    let mut sums = vec![0.0; 20];
    for ch in 0..n {
        let mut rng = channel_stream(config.seed, 0, ch);
        let chn = sample_channels(&big, &g, &mut rng);
        let csi = corrupt_csi(&chn, &big, &mut rng);
        let init = initial_state(&csi, &big, &g.rate_targets).unwrap();
        for (s, p) in sums.iter_mut().zip(&init.allocation.powers) {
            *s += p;
        }
    }
    for (k, s) in sums.iter().enumerate() {
        let fit = power_fit(k, 20, Mode::WithUpdate, &config, &g).unwrap().power();
        let rel = s / n as f64 / fit.mean() - 1.0;
        assert!(rel.abs() <= 0.05, "SU{k}: empirical mean off by {:+.2}%", 100.0 * rel);
    }
}

fn full_set_laws() -> (NetworkConfig, Vec<cogmimo_core::analysis::PowerLaw>) {
    let (config, g) = common::desk();
    let laws = (0..4).map(|k| power_fit(k, 4, Mode::WithUpdate, &config, &g).unwrap().power()).collect();
    (config, laws)
}

/// Budget test and first drop of the full set, over `n` desk draws.
fn full_set_outcomes(n: u64) -> (f64, [f64; 4]) {
    let (config, g) = common::desk();
    let mut feasible = 0usize;
    let mut first_drop = [0usize; 4];
    for ch in 0..n {
        let mut rng = channel_stream(config.seed, 2, ch);
        let chn = sample_channels(&config, &g, &mut rng);
        let csi = corrupt_csi(&chn, &config, &mut rng);
        let init = initial_state(&csi, &config, &g.rate_targets).unwrap();
        let alloc = &init.allocation;
        if alloc.feasible {
            feasible += 1;
        } else {
            let worst = (0..4).max_by(|&a, &b| alloc.powers[a].total_cmp(&alloc.powers[b])).unwrap();
            first_drop[alloc.set[worst]] += 1;
        }
        // DMP must agree that the full set survives exactly when it fits.
        let out = dmp_from(&init, &csi, &config, &g.rate_targets, true).unwrap();
        assert_eq!(out.cardinality() == 4, alloc.feasible);
    }
    (feasible as f64 / n as f64, first_drop.map(|c| c as f64 / n as f64))
}

#[test]
fn feasibility_and_drop_probabilities_match_frequencies() {
    let (config, laws) = full_set_laws();
    let (f_emp, drops_emp) = full_set_outcomes(20_000);
    let f = prob_feasible(&laws, config.budget()).unwrap();
    assert!((f - f_emp).abs() <= 0.03, "f(S0) {f:.4} vs {f_emp:.4}");
    assert!(f > 0.1 && f < 0.9, "desk instance should drop sometimes, f = {f}");
    for j in 0..4 {
        let p = prob_drop(&laws, j, config.budget()).unwrap();
        assert!((p - drops_emp[j]).abs() <= 0.03, "drop SU{j}: {p:.4} vs {:.4}", drops_emp[j]);
    }
}

#[test]
fn more_antennas_never_serve_fewer() {
    let mut config = NetworkConfig::reference(64, 10, 2);
    config.seed = 43;
    let plan = CampaignPlan { locations: 4, channels: 50, jobs: 0, oracle: false };
    let served: Vec<f64> = sweep(&config, Axis::Antennas, &[64.0, 128.0, 256.0], &plan)
        .unwrap()
        .into_iter()
        .map(|p| match p {
            SweepPoint::Done { campaign, .. } => campaign.summary.mean(Algorithm::Dmp, "k_star_star"),
            SweepPoint::Skipped { reason, .. } => panic!("{reason}"),
        })
        .collect();
    assert!(served.windows(2).all(|w| w[1] >= w[0]), "{served:?}");
}
