//! Monte Carlo campaigns.
//!
//! A campaign draws `locations` geometries and `channels` fast-fading
//! blocks per geometry. Every `(location, channel)` cell has its own
//! deterministic RNG substream, so trials can run in any order on any
//! number of threads and still produce the same records. Aggregation walks
//! the records in `(location, channel)` order with compensated summation.
//!
//! Sweeps reuse the base seed for every value. Axes that do not touch node
//! placement (M, I0, rate scale, margins) therefore see the same location
//! draws, which removes geometry noise from the comparison between values.

use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{Mode, Prediction};
use crate::channel::{channel_stream, corrupt_csi, geometry_stream, sample_channels, sample_geometry, Geometry};
use crate::model::dbm_to_watts;
use crate::select::{
    dmp_from, evaluate, exhaustive_optimal, initial_state, mdml, oracle_p2_from, Algorithm, SelectionOutcome,
    EXHAUSTIVE_GUARD,
};
use crate::{Error, NetworkConfig, Result};

/// Per-algorithm measurements of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoRecord {
    pub algo: Algorithm,
    /// |S*|.
    pub cardinality: usize,
    /// K**: selected SUs whose achieved rate meets the target.
    pub k_star_star: usize,
    pub sum_power_w: f64,
    pub max_il_w: f64,
    pub mean_il_w: f64,
    pub iterations: usize,
    /// I_l at every PR, watts.
    pub pr_interference_w: Vec<f64>,
}

impl AlgoRecord {
    fn from_outcome(outcome: &SelectionOutcome, report: &crate::select::PerformanceReport) -> AlgoRecord {
        AlgoRecord {
            algo: outcome.algorithm,
            cardinality: outcome.cardinality(),
            k_star_star: report.satisfied_count,
            sum_power_w: report.sum_power,
            max_il_w: report.max_pr_interference(),
            mean_il_w: report.mean_pr_interference(),
            iterations: outcome.iterations,
            pr_interference_w: report.pr_interference.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub location_idx: u64,
    pub channel_idx: u64,
    pub records: Vec<AlgoRecord>,
}

impl TrialRecord {
    pub fn get(&self, algo: Algorithm) -> Option<&AlgoRecord> {
        self.records.iter().find(|r| r.algo == algo)
    }
}

/// Which oracles join a trial. The exhaustive search is skipped above
/// [`EXHAUSTIVE_GUARD`] users even when requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OracleSwitch {
    pub enabled: bool,
}

impl OracleSwitch {
    pub const ON: OracleSwitch = OracleSwitch { enabled: true };
    pub const OFF: OracleSwitch = OracleSwitch { enabled: false };
}

/// Sample one channel block and CSI error draw from `rng`, run DMP (both
/// modes), MDML and the enabled oracles on the estimates, and score each
/// selection on the true channels.
pub fn run_trial<R: Rng + ?Sized>(
    config: &NetworkConfig,
    geometry: &Geometry,
    rng: &mut R,
    oracle: OracleSwitch,
) -> Result<Vec<AlgoRecord>> {
    let channels = sample_channels(config, geometry, rng);
    let csi = corrupt_csi(&channels, config, rng);
    let targets = &geometry.rate_targets;
    let init = initial_state(&csi, config, targets)?;
    let mut outcomes = vec![
        dmp_from(&init, &csi, config, targets, true)?,
        dmp_from(&init, &csi, config, targets, false)?,
        mdml(&csi, config, targets)?,
    ];
    if oracle.enabled {
        if config.users <= EXHAUSTIVE_GUARD {
            outcomes.push(exhaustive_optimal(&csi, config, targets)?);
        }
        outcomes.push(oracle_p2_from(&init, config));
    }
    Ok(outcomes
        .iter()
        .map(|o| {
            let report = evaluate(&channels, o, &csi.rev_interference, config, targets);
            AlgoRecord::from_outcome(o, &report)
        })
        .collect())
}

/// Geometry of location `location` under `config.seed`.
pub fn location_geometry(config: &NetworkConfig, location: u64) -> Result<Geometry> {
    sample_geometry(config, &mut geometry_stream(config.seed, location))
}

/// Campaign size and execution settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignPlan {
    pub locations: u64,
    pub channels: u64,
    /// Worker threads; 0 lets rayon decide.
    #[serde(skip)]
    pub jobs: usize,
    pub oracle: bool,
}

impl CampaignPlan {
    /// 50 locations x 200 channels.
    pub fn desk() -> CampaignPlan {
        CampaignPlan { locations: 50, channels: 200, jobs: 0, oracle: false }
    }

    pub fn trials(&self) -> u64 {
        self.locations * self.channels
    }

    fn check(&self) -> Result<()> {
        if self.locations == 0 || self.channels == 0 {
            return Err(Error::Usage(format!(
                "campaign needs at least one location and one channel (got {} x {})",
                self.locations, self.channels
            )));
        }
        Ok(())
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Error::Numeric(format!("thread pool: {e}")))
}

/// Run every trial of `plan` and return the records in
/// `(location, channel)` order.
pub fn run_trials(config: &NetworkConfig, plan: &CampaignPlan) -> Result<Vec<TrialRecord>> {
    plan.check()?;
    let geometries = (0..plan.locations).map(|loc| location_geometry(config, loc)).collect::<Result<Vec<_>>>()?;
    let cells: Vec<(u64, u64)> = (0..plan.locations).flat_map(|l| (0..plan.channels).map(move |c| (l, c))).collect();
    let oracle = OracleSwitch { enabled: plan.oracle };
    pool(plan.jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&(loc, ch)| {
                let mut rng = channel_stream(config.seed, loc, ch);
                run_trial(config, &geometries[loc as usize], &mut rng, oracle)
                    .map(|records| TrialRecord { location_idx: loc, channel_idx: ch, records })
                    .map_err(|e| Error::Trial { location: loc, channel: ch, source: Box::new(e) })
            })
            .collect()
    })
}

/// Origin of a summary row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Simulation,
    Analysis,
}

/// One aggregated metric. Skipped sweep points appear as a row with metric
/// `skipped`, `n = 0`, NaN statistics and the reason in `algo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config_hash: String,
    pub axis: String,
    pub axis_value: f64,
    pub source: Source,
    pub algo: String,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSummary {
    pub config: NetworkConfig,
    pub rows: Vec<SummaryRow>,
}

impl CampaignSummary {
    pub fn get(&self, algo: Algorithm, metric: &str) -> Option<&SummaryRow> {
        let tag = algo.tag();
        self.rows.iter().find(|r| r.algo == tag && r.metric == metric)
    }

    /// Mean of `metric` for `algo`; NaN if absent.
    pub fn mean(&self, algo: Algorithm, metric: &str) -> f64 {
        self.get(algo, metric).map_or(f64::NAN, |r| r.mean)
    }

    pub fn stderr(&self, algo: Algorithm, metric: &str) -> f64 {
        self.get(algo, metric).map_or(f64::NAN, |r| r.stderr)
    }

    /// Label every row with a sweep coordinate.
    pub fn with_axis(mut self, axis: &str, value: f64) -> Self {
        for r in &mut self.rows {
            r.axis = axis.to_string();
            r.axis_value = value;
        }
        self
    }
}

/// Running mean and variance with Neumaier-compensated sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    n: u64,
    sum: f64,
    sum_c: f64,
    sq: f64,
    sq_c: f64,
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        neumaier(&mut self.sum, &mut self.sum_c, x);
        neumaier(&mut self.sq, &mut self.sq_c, x * x);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.sum + self.sum_c) / self.n as f64
    }

    /// Standard error of the mean, `s / sqrt(n)` with the unbiased sample
    /// deviation. Zero for a single sample.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.mean();
        let var = ((self.sq + self.sq_c) - n * mean * mean).max(0.0) / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Metric names that [`summarize`] emits for every algorithm, besides the
/// per-PR `il_w_pr<l>` entries.
pub const METRICS: [&str; 6] = ["cardinality", "k_star_star", "sum_power_w", "max_il_w", "mean_il_w", "iterations"];

/// Aggregate records into one row per (algorithm, metric).
pub fn summarize(config: &NetworkConfig, trials: &[TrialRecord]) -> CampaignSummary {
    let hash = config.fingerprint();
    let mut algos: Vec<Algorithm> = Vec::new();
    for t in trials {
        for r in &t.records {
            if !algos.contains(&r.algo) {
                algos.push(r.algo);
            }
        }
    }
    let mut rows = Vec::new();
    for algo in algos {
        let recs: Vec<&AlgoRecord> = trials.iter().filter_map(|t| t.get(algo)).collect();
        let pairs = recs.first().map_or(0, |r| r.pr_interference_w.len());
        let mut metrics: Vec<(String, Accumulator)> = METRICS
            .iter()
            .map(|m| m.to_string())
            .chain((0..pairs).map(|l| format!("il_w_pr{l}")))
            .map(|m| (m, Accumulator::default()))
            .collect();
        for r in &recs {
            let values = [
                r.cardinality as f64,
                r.k_star_star as f64,
                r.sum_power_w,
                r.max_il_w,
                r.mean_il_w,
                r.iterations as f64,
            ]
            .into_iter()
            .chain(r.pr_interference_w.iter().copied());
            for ((_, acc), v) in metrics.iter_mut().zip(values) {
                acc.push(v);
            }
        }
        for (metric, acc) in metrics {
            rows.push(SummaryRow {
                config_hash: hash.clone(),
                axis: String::new(),
                axis_value: f64::NAN,
                source: Source::Simulation,
                algo: algo.tag().to_string(),
                metric,
                mean: acc.mean(),
                stderr: acc.stderr(),
                n: acc.count(),
            });
        }
    }
    CampaignSummary { config: config.clone(), rows }
}

/// Records plus their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub trials: Vec<TrialRecord>,
    pub summary: CampaignSummary,
}

pub fn run_campaign(config: &NetworkConfig, plan: &CampaignPlan) -> Result<Campaign> {
    let trials = run_trials(config, plan)?;
    let summary = summarize(config, &trials);
    Ok(Campaign { trials, summary })
}

/// Closed-form predictions averaged over the campaign's location draws,
/// for DMP with and without beam update. Rows use the same schema as
/// simulation summaries with `source = analysis`; `n` counts locations.
pub fn analyze_campaign(config: &NetworkConfig, plan: &CampaignPlan) -> Result<CampaignSummary> {
    plan.check()?;
    let hash = config.fingerprint();
    let preds: Vec<[Prediction; 2]> = pool(plan.jobs)?.install(|| {
        (0..plan.locations)
            .into_par_iter()
            .map(|loc| {
                let g = location_geometry(config, loc)?;
                let run = |mode| Prediction::compute(config, &g, mode);
                Ok([run(Mode::WithUpdate)?, run(Mode::WithoutUpdate)?])
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::new();
    for (i, mode) in Mode::BOTH.into_iter().enumerate() {
        let mut acc = [Accumulator::default(); 3];
        for p in &preds {
            let p = &p[i];
            let il = if p.expected_interference.is_empty() {
                0.0
            } else {
                p.expected_interference.iter().sum::<f64>() / p.expected_interference.len() as f64
            };
            acc[0].push(p.expected_selected);
            acc[1].push(p.expected_satisfied);
            acc[2].push(il);
        }
        for (metric, a) in ["cardinality", "k_star_star", "mean_il_w"].into_iter().zip(acc) {
            rows.push(SummaryRow {
                config_hash: hash.clone(),
                axis: String::new(),
                axis_value: f64::NAN,
                source: Source::Analysis,
                algo: mode.algorithm().tag().to_string(),
                metric: metric.to_string(),
                mean: a.mean(),
                stderr: a.stderr(),
                n: a.count(),
            });
        }
    }
    Ok(CampaignSummary { config: config.clone(), rows })
}

/// Allowed |analysis - simulation| per metric: 0.3 users for counts, 10%
/// relative for interference.
pub fn acceptance_band(metric: &str, simulated: f64) -> Option<f64> {
    match metric {
        "cardinality" | "k_star_star" => Some(0.3),
        "mean_il_w" => Some(0.1 * simulated.abs()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub algo: String,
    pub metric: String,
    pub analysis: f64,
    pub simulation: f64,
    pub abs_deviation: f64,
    pub band: f64,
    pub pass: bool,
}

/// Join analysis and simulation rows on (algo, metric). Rows for metrics
/// without an acceptance band are ignored. Both sides must come from the
/// same configuration.
pub fn compare_summaries(analysis: &[SummaryRow], simulation: &[SummaryRow]) -> Result<Vec<Deviation>> {
    let hashes: Vec<&str> = analysis.iter().chain(simulation).map(|r| r.config_hash.as_str()).collect();
    if let Some(first) = hashes.first() {
        if let Some(other) = hashes.iter().find(|h| *h != first) {
            return Err(Error::Usage(format!(
                "analysis and simulation come from different configs ({first} vs {other})"
            )));
        }
    }
    let mut out = Vec::new();
    for a in analysis.iter().filter(|r| r.source == Source::Analysis) {
        let Some(s) =
            simulation.iter().find(|s| s.source == Source::Simulation && s.algo == a.algo && s.metric == a.metric)
        else {
            continue;
        };
        let Some(band) = acceptance_band(&a.metric, s.mean) else {
            continue;
        };
        let d = (a.mean - s.mean).abs();
        out.push(Deviation {
            algo: a.algo.clone(),
            metric: a.metric.clone(),
            analysis: a.mean,
            simulation: s.mean,
            abs_deviation: d,
            band,
            pass: d <= band,
        });
    }
    if out.is_empty() {
        return Err(Error::Usage("no common (algo, metric) rows between analysis and simulation".into()));
    }
    Ok(out)
}

/// Parameter swept by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// Antenna count.
    #[serde(rename = "M")]
    Antennas,
    /// Interference threshold in dBm.
    #[serde(rename = "I0")]
    Threshold,
    /// Multiplier on every rate target.
    #[serde(rename = "R0-scale")]
    RateScale,
    #[serde(rename = "L")]
    PrimaryPairs,
    #[serde(rename = "K")]
    Users,
    /// eps1 as a multiple of sigma_Delta2.
    #[serde(rename = "eps1-scale")]
    Eps1Scale,
    /// eps2 as a multiple of P0 * sigma_delta2.
    #[serde(rename = "eps2-scale")]
    Eps2Scale,
}

impl Axis {
    pub const ALL: [Axis; 7] = [
        Axis::Antennas,
        Axis::Threshold,
        Axis::RateScale,
        Axis::PrimaryPairs,
        Axis::Users,
        Axis::Eps1Scale,
        Axis::Eps2Scale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Antennas => "M",
            Axis::Threshold => "I0",
            Axis::RateScale => "R0-scale",
            Axis::PrimaryPairs => "L",
            Axis::Users => "K",
            Axis::Eps1Scale => "eps1-scale",
            Axis::Eps2Scale => "eps2-scale",
        }
    }

    pub fn parse(name: &str) -> Result<Axis> {
        Axis::ALL.into_iter().find(|a| a.name() == name).ok_or_else(|| {
            let names: Vec<&str> = Axis::ALL.iter().map(|a| a.name()).collect();
            Error::Usage(format!("unknown sweep axis `{name}` (expected one of {})", names.join(", ")))
        })
    }

    /// The base config with this axis set to `value`, validated.
    pub fn apply(self, base: &NetworkConfig, value: f64) -> Result<NetworkConfig> {
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::Usage(format!("{} must be a non-negative integer (got {v})", self.name())))
            }
        };
        let mut c = base.clone();
        match self {
            Axis::Antennas => c.antennas = count(value)?,
            Axis::Threshold => c.interference_threshold = dbm_to_watts(value)?,
            Axis::RateScale => c.rate_targets = base.rate_targets.scaled(value),
            Axis::PrimaryPairs => c.primary_pairs = count(value)?,
            Axis::Users => c.users = count(value)?,
            Axis::Eps1Scale => c.eps1 = value * base.sigma_cap_delta2,
            Axis::Eps2Scale => c.eps2 = value * base.sbs_power * base.sigma_delta2,
        }
        c.validated()
    }
}

/// Result for one sweep value.
#[derive(Debug)]
pub enum SweepPoint {
    Done { value: f64, campaign: Campaign },
    Skipped { value: f64, reason: String },
}

impl SweepPoint {
    pub fn value(&self) -> f64 {
        match self {
            SweepPoint::Done { value, .. } | SweepPoint::Skipped { value, .. } => *value,
        }
    }

    /// Summary rows labelled with the axis, or one warning row if skipped.
    pub fn rows(&self, base: &NetworkConfig, axis: Axis) -> Vec<SummaryRow> {
        match self {
            SweepPoint::Done { value, campaign } => campaign.summary.clone().with_axis(axis.name(), *value).rows,
            SweepPoint::Skipped { value, reason } => vec![SummaryRow {
                config_hash: base.fingerprint(),
                axis: axis.name().to_string(),
                axis_value: *value,
                source: Source::Simulation,
                algo: reason.clone(),
                metric: "skipped".to_string(),
                mean: f64::NAN,
                stderr: f64::NAN,
                n: 0,
            }],
        }
    }
}

/// One campaign per value. Values whose derived config is invalid are
/// reported as [`SweepPoint::Skipped`]; failures inside a campaign abort
/// the sweep.
pub fn sweep(base: &NetworkConfig, axis: Axis, values: &[f64], plan: &CampaignPlan) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".into()));
    }
    values
        .iter()
        .map(|&value| match axis.apply(base, value) {
            Ok(cfg) => Ok(SweepPoint::Done { value, campaign: run_campaign(&cfg, plan)? }),
            Err(e @ (Error::Config(_) | Error::Usage(_) | Error::Domain(_))) => {
                Ok(SweepPoint::Skipped { value, reason: e.to_string().replace('\n', " ") })
            }
            Err(e) => Err(e),
        })
        .collect()
}

#[derive(Serialize)]
struct TrialRow<'a> {
    location_idx: u64,
    channel_idx: u64,
    algo: &'a str,
    cardinality: usize,
    k_star_star: usize,
    sum_power_w: f64,
    max_il_w: f64,
    mean_il_w: f64,
    iterations: usize,
}

/// One CSV row per (trial, algorithm).
pub fn write_trials_csv<W: Write>(trials: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in trials {
        for r in &t.records {
            w.serialize(TrialRow {
                location_idx: t.location_idx,
                channel_idx: t.channel_idx,
                algo: r.algo.tag(),
                cardinality: r.cardinality,
                k_star_star: r.k_star_star,
                sum_power_w: r.sum_power_w,
                max_il_w: r.max_il_w,
                mean_il_w: r.mean_il_w,
                iterations: r.iterations,
            })?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Error::from)).collect()
}
