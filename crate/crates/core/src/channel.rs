//! Cell geometry, Rayleigh channels and imperfect CSI.
//!
//! Sampling is split in two stages: one [`Geometry`] (node placement and
//! slow fading) hosts many [`ChannelRealization`]s (fast fading). Each stage
//! draws from its own deterministic substream, see [`substream`].

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::NetworkConfig;
use crate::{Cplx, Error, Result};

const MAX_PLACEMENT_ATTEMPTS: usize = 1_000_000;
const WORDS_PER_SUBSTREAM: u128 = 1 << 32;

/// Deterministic generator for the `(location, index)` cell of a campaign.
///
/// The location selects the ChaCha stream and the index a disjoint
/// 2^32-word window inside it, so any trial can be replayed without
/// touching the others. Index 0 is reserved for the geometry draw; channel
/// realizations use `1 + channel`.
pub fn substream(seed: u64, location: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(location);
    rng.set_word_pos(u128::from(index) * WORDS_PER_SUBSTREAM);
    rng
}

pub fn geometry_stream(seed: u64, location: u64) -> ChaCha8Rng {
    substream(seed, location, 0)
}

pub fn channel_stream(seed: u64, location: u64, channel: u64) -> ChaCha8Rng {
    substream(seed, location, channel + 1)
}

type Point = (f64, f64);

/// Node placement and slow-fading coefficients for one location draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// beta_k, SBS to SU-k.
    pub su_beta: Vec<f64>,
    /// beta_lk indexed `[l][k]`, PT-l to SU-k.
    pub pt_su_beta: Vec<Vec<f64>>,
    /// beta_l0, PR-l to SBS.
    pub pr_beta: Vec<f64>,
    /// Resolved per-SU rate targets for this location.
    pub rate_targets: Vec<f64>,
    pub su_pos: Vec<Point>,
    pub pt_pos: Vec<Point>,
    pub pr_pos: Vec<Point>,
}

impl Geometry {
    /// Build from explicit node positions (SBS at the origin). Shadowing is
    /// not applied; use this for fixed, reproducible scenarios.
    pub fn from_positions(
        config: &NetworkConfig,
        su_pos: Vec<Point>,
        pt_pos: Vec<Point>,
        pr_pos: Vec<Point>,
        rate_targets: Vec<f64>,
    ) -> Result<Self> {
        if su_pos.len() != config.users
            || pt_pos.len() != config.primary_pairs
            || pr_pos.len() != config.primary_pairs
            || rate_targets.len() != config.users
        {
            return Err(Error::Usage("node counts do not match the configuration".into()));
        }
        let loss = |a: Point, b: Point| pathloss(config, dist(a, b));
        Ok(Geometry {
            su_beta: su_pos.iter().map(|&p| loss((0.0, 0.0), p)).collect(),
            pt_su_beta: pt_pos.iter().map(|&t| su_pos.iter().map(|&s| loss(t, s)).collect()).collect(),
            pr_beta: pr_pos.iter().map(|&p| loss((0.0, 0.0), p)).collect(),
            rate_targets,
            su_pos,
            pt_pos,
            pr_pos,
        })
    }

    pub fn users(&self) -> usize {
        self.su_beta.len()
    }

    pub fn primary_pairs(&self) -> usize {
        self.pr_beta.len()
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Distance-only path loss `(d / d_ref)^(-alpha)`. Distances below the
/// reference distance are clamped to it so co-located nodes stay finite.
fn pathloss(config: &NetworkConfig, d: f64) -> f64 {
    (d.max(config.ref_distance_m) / config.ref_distance_m).powf(-config.pathloss_exp)
}

fn uniform_disc<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Point {
    // sqrt of a uniform radius fraction gives uniform area density.
    let r = radius * rng.gen::<f64>().sqrt();
    let phi = rng.gen::<f64>() * std::f64::consts::TAU;
    (r * phi.cos(), r * phi.sin())
}

/// Drop nodes uniformly on the cell disc and compute `beta = rho * d^-alpha`
/// with log-normal shadowing `rho = 10^(X/10)`, `X ~ N(0, sigma_s^2)`.
///
/// SUs closer than `min_distance_m` to the SBS are rejected and redrawn.
pub fn sample_geometry<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Result<Geometry> {
    let radius = config.cell_radius_m;
    let mut su_pos = Vec::with_capacity(config.users);
    let mut attempts = 0usize;
    while su_pos.len() < config.users {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::Numeric(format!(
                "SU placement gave up after {MAX_PLACEMENT_ATTEMPTS} draws \
                 (min_distance_m {} vs cell_radius_m {radius})",
                config.min_distance_m
            )));
        }
        let p = uniform_disc(rng, radius);
        if dist(p, (0.0, 0.0)) >= config.min_distance_m {
            su_pos.push(p);
        }
    }
    let pt_pos: Vec<Point> = (0..config.primary_pairs).map(|_| uniform_disc(rng, radius)).collect();
    let pr_pos: Vec<Point> = (0..config.primary_pairs).map(|_| uniform_disc(rng, radius)).collect();

    let shadow =
        Normal::new(0.0, config.shadow_sigma_db).map_err(|e| Error::Domain(format!("shadowing deviation: {e}")))?;
    let mut beta = |a: Point, b: Point| {
        let x: f64 = shadow.sample(rng);
        10f64.powf(x / 10.0) * pathloss(config, dist(a, b))
    };
    let su_beta = su_pos.iter().map(|&p| beta((0.0, 0.0), p)).collect();
    let pt_su_beta = pt_pos.iter().map(|&t| su_pos.iter().map(|&s| beta(t, s)).collect()).collect();
    let pr_beta = pr_pos.iter().map(|&p| beta((0.0, 0.0), p)).collect();
    let rate_targets = config.rate_targets.resolve(config.users, rng);
    Ok(Geometry { su_beta, pt_su_beta, pr_beta, rate_targets, su_pos, pt_pos, pr_pos })
}

/// True small-scale channels for one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// M x K, column k is h_k.
    pub h_su: DMatrix<Cplx>,
    /// M x L, column l is h_l0.
    pub h_pr: DMatrix<Cplx>,
    /// L x K scalar channels h_lk.
    pub h_pt_su: DMatrix<Cplx>,
}

/// What the SBS knows: noisy channel estimates plus the measured reverse
/// interference at each SU.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiView {
    pub hhat_su: DMatrix<Cplx>,
    pub hhat_pr: DMatrix<Cplx>,
    pub sigma_delta2: f64,
    pub sigma_cap_delta2: f64,
    /// I_k in watts.
    pub rev_interference: Vec<f64>,
}

impl CsiView {
    pub fn antennas(&self) -> usize {
        self.hhat_su.nrows()
    }

    pub fn users(&self) -> usize {
        self.hhat_su.ncols()
    }

    pub fn primary_pairs(&self) -> usize {
        self.hhat_pr.ncols()
    }
}

/// One CN(0, var) sample: real and imaginary parts each N(0, var/2).
fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Cplx {
    let s = (0.5 * var).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Cplx::new(s * re, s * im)
}

fn cn_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, col_var: &[f64]) -> DMatrix<Cplx> {
    let mut m = DMatrix::zeros(rows, col_var.len());
    for (j, &var) in col_var.iter().enumerate() {
        for i in 0..rows {
            m[(i, j)] = cn(rng, var);
        }
    }
    m
}

/// `h = sqrt(beta) * h_tilde` with `h_tilde ~ CN(0, I)` for every link.
pub fn sample_channels<R: Rng + ?Sized>(
    config: &NetworkConfig,
    geometry: &Geometry,
    rng: &mut R,
) -> ChannelRealization {
    let m = config.antennas;
    let h_su = cn_matrix(rng, m, &geometry.su_beta);
    let h_pr = cn_matrix(rng, m, &geometry.pr_beta);
    let l = geometry.primary_pairs();
    let k = geometry.users();
    let mut h_pt_su = DMatrix::zeros(l, k);
    for kk in 0..k {
        for ll in 0..l {
            h_pt_su[(ll, kk)] = cn(rng, geometry.pt_su_beta[ll][kk]);
        }
    }
    ChannelRealization { h_su, h_pr, h_pt_su }
}

/// `I_k = sum_l Pp |h_lk|^2`, measured on the true channels.
pub fn reverse_interference(channels: &ChannelRealization, pt_power: f64) -> Vec<f64> {
    channels.h_pt_su.column_iter().map(|col| pt_power * col.iter().map(|h| h.norm_sqr()).sum::<f64>()).collect()
}

/// Add `CN(0, sigma^2 I)` estimation error to every SBS-side channel.
pub fn corrupt_csi<R: Rng + ?Sized>(channels: &ChannelRealization, config: &NetworkConfig, rng: &mut R) -> CsiView {
    let add_error = |h: &DMatrix<Cplx>, var: f64, rng: &mut R| {
        if var == 0.0 {
            return h.clone();
        }
        let e = cn_matrix(rng, h.nrows(), &vec![var; h.ncols()]);
        h + e
    };
    let hhat_su = add_error(&channels.h_su, config.sigma_delta2, rng);
    let hhat_pr = add_error(&channels.h_pr, config.sigma_cap_delta2, rng);
    CsiView {
        hhat_su,
        hhat_pr,
        sigma_delta2: config.sigma_delta2,
        sigma_cap_delta2: config.sigma_cap_delta2,
        rev_interference: reverse_interference(channels, config.pt_power),
    }
}

/// Write a realization as CSV: one row per channel vector,
/// `kind,index,re0,im0,re1,im1,...` with kind in {su, pr, ptsu}. The `ptsu`
/// rows hold h_lk for a fixed SU k across l.
pub fn write_channels_csv<W: Write>(channels: &ChannelRealization, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let mut emit = |kind: &str, m: &DMatrix<Cplx>| -> Result<()> {
        for (j, col) in m.column_iter().enumerate() {
            let mut row = vec![kind.to_string(), j.to_string()];
            for z in col.iter() {
                row.push(format!("{:e}", z.re));
                row.push(format!("{:e}", z.im));
            }
            w.write_record(&row)?;
        }
        Ok(())
    };
    emit("su", &channels.h_su)?;
    emit("pr", &channels.h_pr)?;
    emit("ptsu", &channels.h_pt_su)?;
    w.flush().map_err(|e| Error::io("<channel csv>", e))?;
    Ok(())
}

pub fn read_channels_csv<R: BufRead>(input: R) -> Result<ChannelRealization> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut cols: [Vec<Vec<Cplx>>; 3] = Default::default();
    for rec in rd.records() {
        let rec = rec?;
        let slot = match rec.get(0) {
            Some("su") => 0,
            Some("pr") => 1,
            Some("ptsu") => 2,
            other => return Err(Error::Usage(format!("unknown channel kind {other:?}"))),
        };
        let nums: Vec<f64> = rec
            .iter()
            .skip(2)
            .map(|s| s.parse::<f64>().map_err(|e| Error::Usage(format!("bad number {s}: {e}"))))
            .collect::<Result<_>>()?;
        if nums.len() % 2 != 0 {
            return Err(Error::Usage("odd number of real/imag fields".into()));
        }
        cols[slot].push(nums.chunks(2).map(|c| Cplx::new(c[0], c[1])).collect());
    }
    let to_matrix = |cols: &[Vec<Cplx>], rows_if_empty: usize| {
        let rows = cols.first().map_or(rows_if_empty, Vec::len);
        DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
    };
    let m = cols[0].first().map_or(0, Vec::len);
    let l = cols[1].len();
    Ok(ChannelRealization {
        h_su: to_matrix(&cols[0], m),
        h_pr: to_matrix(&cols[1], m),
        h_pt_su: to_matrix(&cols[2], l),
    })
}
