//! Scenario configuration, unit conversion and validation.
//!
//! Everything inside the crate works in linear units (watts, meters). dBm only
//! appears at the JSON boundary: any power key may be given with a `_dbm`
//! suffix (`"P0_dbm": 40`) and is converted when the config is loaded.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{Error, Result};

/// Power keys that accept a `_dbm` spelling in JSON.
pub const POWER_KEYS: [&str; 7] = ["P0", "Pp", "I0", "sigma_w2", "eps1", "eps2", "sigma_delta2"];

pub fn dbm_to_watts(dbm: f64) -> Result<f64> {
    if !dbm.is_finite() {
        return Err(Error::Domain(format!("{dbm} dBm is not finite")));
    }
    Ok(10f64.powf((dbm - 30.0) / 10.0))
}

pub fn watts_to_dbm(watts: f64) -> Result<f64> {
    if !(watts > 0.0) || !watts.is_finite() {
        return Err(Error::Domain(format!("{watts} W has no dBm value (power must be positive and finite)")));
    }
    Ok(10.0 * watts.log10() + 30.0)
}

/// Per-SU minimum rates R0_k in bits/s/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateTargets {
    /// Same target for every SU.
    Common(f64),
    /// One target per SU, length K.
    PerUser(Vec<f64>),
    /// Drawn uniformly on (lo, hi] once per location realization.
    Uniform { uniform: [f64; 2] },
}

impl RateTargets {
    /// Resolve to a length-`users` vector. Only the uniform variant consumes
    /// randomness.
    pub fn resolve<R: Rng + ?Sized>(&self, users: usize, rng: &mut R) -> Vec<f64> {
        match self {
            RateTargets::Common(r) => vec![*r; users],
            RateTargets::PerUser(v) => v.clone(),
            RateTargets::Uniform { uniform: [lo, hi] } => (0..users)
                .map(|_| {
                    // gen::<f64>() is on [0, 1); flip it onto (lo, hi].
                    let u: f64 = rng.gen();
                    hi - u * (hi - lo)
                })
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> RateTargets {
        match self {
            RateTargets::Common(r) => RateTargets::Common(r * factor),
            RateTargets::PerUser(v) => RateTargets::PerUser(v.iter().map(|r| r * factor).collect()),
            RateTargets::Uniform { uniform: [lo, hi] } => RateTargets::Uniform { uniform: [lo * factor, hi * factor] },
        }
    }
}

/// All scenario parameters, in linear units.
///
/// JSON keys are the symbol names (`M`, `K`, `L`, `P0`, ...). The CSI error
/// variances default to `sigma_w2 / P0` (SU links) and `sigma_w2 / Pp`
/// (primary links) and the margins default to `eps1 = sigma_Delta2`,
/// `eps2 = P0 * sigma_delta2`; all four can be overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(rename = "M")]
    pub antennas: usize,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "L")]
    pub primary_pairs: usize,
    /// SBS power budget P0 (W).
    #[serde(rename = "P0")]
    pub sbs_power: f64,
    /// Transmit power of each primary transmitter (W).
    #[serde(rename = "Pp")]
    pub pt_power: f64,
    /// Interference threshold at each primary receiver (W).
    #[serde(rename = "I0")]
    pub interference_threshold: f64,
    /// Noise power (W).
    #[serde(rename = "sigma_w2")]
    pub noise: f64,
    #[serde(rename = "R0")]
    pub rate_targets: RateTargets,
    /// Interference margin, dimensionless.
    pub eps1: f64,
    /// Rate margin (W).
    pub eps2: f64,
    /// SU-link CSI error variance.
    pub sigma_delta2: f64,
    /// Primary-link CSI error variance.
    #[serde(rename = "sigma_Delta2")]
    pub sigma_cap_delta2: f64,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    pub pathloss_exp: f64,
    /// Distance at which path loss is unity (meters).
    pub ref_distance_m: f64,
    pub shadow_sigma_db: f64,
    pub seed: u64,
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue(pub String);

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl NetworkConfig {
    /// The simulation setting used throughout the reference results: 40 dBm
    /// SBS budget, 20 dBm primary transmitters, -100 dBm noise, -106 dBm
    /// threshold, 1 bit/s/Hz targets, 2 km cell with 100 m exclusion, 8 dB
    /// shadowing and the recommended margins.
    pub fn reference(antennas: usize, users: usize, primary_pairs: usize) -> Self {
        let sbs_power = 10.0;
        let pt_power = 0.1;
        let noise = 1e-13;
        let mut cfg = NetworkConfig {
            antennas,
            users,
            primary_pairs,
            sbs_power,
            pt_power,
            interference_threshold: 10f64.powf((-106.0 - 30.0) / 10.0),
            noise,
            rate_targets: RateTargets::Common(1.0),
            eps1: 0.0,
            eps2: 0.0,
            sigma_delta2: noise / sbs_power,
            sigma_cap_delta2: noise / pt_power,
            cell_radius_m: 2000.0,
            min_distance_m: 100.0,
            pathloss_exp: 3.8,
            ref_distance_m: 1.0,
            shadow_sigma_db: 8.0,
            seed: 0,
        };
        let (e1, e2) = cfg.default_margins().expect("reference powers are positive");
        cfg.eps1 = e1;
        cfg.eps2 = e2;
        cfg
    }

    /// Recommended margins `(eps1, eps2) = (sigma_Delta2, P0 * sigma_delta2)`.
    /// With the default error model this is `(sigma_w2 / Pp, sigma_w2)`.
    pub fn default_margins(&self) -> Result<(f64, f64)> {
        if !(self.sbs_power > 0.0) || !(self.pt_power > 0.0) || !(self.noise > 0.0) {
            return Err(Error::Domain("margins need positive P0, Pp and sigma_w2".to_string()));
        }
        Ok((self.sigma_cap_delta2, self.sbs_power * self.sigma_delta2))
    }

    /// Transmit-power budget `min(I0 / eps1, P0)`. With `eps1 = 0` the
    /// interference constraint is vacuous and the budget is `P0`.
    pub fn budget(&self) -> f64 {
        if self.eps1 > 0.0 {
            (self.interference_threshold / self.eps1).min(self.sbs_power)
        } else {
            self.sbs_power
        }
    }

    /// Every violated invariant; empty when the config is usable.
    pub fn validate(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut bad = |cond: bool, msg: String| {
            if cond {
                issues.push(ConfigIssue(msg));
            }
        };
        bad(self.users == 0, "K must be at least 1".into());
        bad(
            self.antennas < self.users + self.primary_pairs,
            format!(
                "M < K+L ({} < {}): zero-forcing cannot place K+L-1 nulls",
                self.antennas,
                self.users + self.primary_pairs
            ),
        );
        for (name, v) in [
            ("P0", self.sbs_power),
            ("Pp", self.pt_power),
            ("I0", self.interference_threshold),
            ("sigma_w2", self.noise),
        ] {
            bad(!(v > 0.0) || !v.is_finite(), format!("{name} must be positive (got {v})"));
        }
        for (name, v) in [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("sigma_delta2", self.sigma_delta2),
            ("sigma_Delta2", self.sigma_cap_delta2),
        ] {
            bad(!(v >= 0.0) || !v.is_finite(), format!("{name} must be non-negative (got {v})"));
        }
        match &self.rate_targets {
            RateTargets::Common(r) => bad(!(*r > 0.0) || !r.is_finite(), format!("R0 must be positive (got {r})")),
            RateTargets::PerUser(v) => {
                bad(v.len() != self.users, format!("R0 has {} entries but K = {}", v.len(), self.users));
                for (k, r) in v.iter().enumerate() {
                    bad(!(*r > 0.0) || !r.is_finite(), format!("R0[{k}] must be positive (got {r})"));
                }
            }
            RateTargets::Uniform { uniform: [lo, hi] } => bad(
                !(*lo >= 0.0 && hi > lo && hi.is_finite()),
                format!("R0 uniform range ({lo}, {hi}] must satisfy 0 <= lo < hi"),
            ),
        }
        bad(!(self.cell_radius_m > 0.0) || !self.cell_radius_m.is_finite(), "cell_radius_m must be positive".into());
        bad(
            !(self.min_distance_m >= 0.0 && self.min_distance_m < self.cell_radius_m),
            format!(
                "min_distance_m must lie in [0, cell_radius_m) (got {} vs {})",
                self.min_distance_m, self.cell_radius_m
            ),
        );
        bad(!(self.pathloss_exp > 0.0), "pathloss_exp must be positive".into());
        bad(!(self.ref_distance_m > 0.0), "ref_distance_m must be positive".into());
        bad(!(self.shadow_sigma_db >= 0.0), "shadow_sigma_db must be non-negative".into());
        issues
    }

    pub fn validated(self) -> Result<Self> {
        let issues = self.validate();
        if issues.is_empty() {
            Ok(self)
        } else {
            Err(Error::Config(issues))
        }
    }

    /// Parse from a flat JSON object. See [`normalize_json`] for the accepted
    /// spellings and defaults. The result is not validated.
    pub fn from_json_value(value: Value) -> Result<Self> {
        let map = normalize_json(value)?;
        Ok(serde_json::from_value(Value::Object(map))?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_json_value(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Stable 64-bit FNV-1a hash of the canonical JSON form. Used to tie
    /// output files to the config that produced them.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Bring a user-written JSON object into the canonical key set:
///
/// * `<key>_dbm` power keys are converted to watts under `<key>`;
/// * missing optional geometry keys get their reference values;
/// * `sigma_delta2` / `sigma_Delta2` default to `sigma_w2/P0` and `sigma_w2/Pp`;
/// * `eps1` / `eps2` default to the recommended margins, optionally
///   multiplied by `eps1_scale` / `eps2_scale`.
///
/// Unknown keys are left alone so that campaign settings can share the file.
pub fn normalize_json(value: Value) -> Result<Map<String, Value>> {
    let Value::Object(mut map) = value else {
        return Err(Error::Usage("config must be a JSON object".into()));
    };
    for key in POWER_KEYS {
        let dbm_key = format!("{key}_dbm");
        if let Some(v) = map.remove(&dbm_key) {
            if map.contains_key(key) {
                return Err(Error::Usage(format!("both {key} and {dbm_key} given")));
            }
            let dbm = v.as_f64().ok_or_else(|| Error::Usage(format!("{dbm_key} must be a number")))?;
            map.insert(key.to_string(), Value::from(dbm_to_watts(dbm)?));
        }
    }
    let num = |map: &Map<String, Value>, key: &str| map.get(key).and_then(Value::as_f64);

    for (key, default) in [
        ("cell_radius_m", 2000.0),
        ("min_distance_m", 100.0),
        ("pathloss_exp", 3.8),
        ("ref_distance_m", 1.0),
        ("shadow_sigma_db", 8.0),
    ] {
        map.entry(key).or_insert(Value::from(default));
    }
    map.entry("seed").or_insert(Value::from(0u64));

    let noise = num(&map, "sigma_w2");
    let p0 = num(&map, "P0");
    let pp = num(&map, "Pp");
    if !map.contains_key("sigma_delta2") {
        if let (Some(n), Some(p)) = (noise, p0) {
            map.insert("sigma_delta2".into(), Value::from(n / p));
        }
    }
    if !map.contains_key("sigma_Delta2") {
        if let (Some(n), Some(p)) = (noise, pp) {
            map.insert("sigma_Delta2".into(), Value::from(n / p));
        }
    }
    let s1 = map.remove("eps1_scale").and_then(|v| v.as_f64()).unwrap_or(1.0);
    let s2 = map.remove("eps2_scale").and_then(|v| v.as_f64()).unwrap_or(1.0);
    if !map.contains_key("eps1") {
        if let Some(d) = num(&map, "sigma_Delta2") {
            map.insert("eps1".into(), Value::from(s1 * d));
        }
    }
    if !map.contains_key("eps2") {
        if let (Some(d), Some(p)) = (num(&map, "sigma_delta2"), p0) {
            map.insert("eps2".into(), Value::from(s2 * p * d));
        }
    }
    Ok(map)
}

/// Apply a `key=value` override to a raw JSON config object. The value is
/// parsed as JSON when possible (numbers, arrays, objects), otherwise kept as
/// a string. Dotted keys address nested objects.
pub fn apply_override(map: &mut Map<String, Value>, assignment: &str) -> Result<()> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| Error::Usage(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Usage(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::from(raw.trim()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = map;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Object(Map::new()));
        cur =
            entry.as_object_mut().ok_or_else(|| Error::Usage(format!("override path `{key}` crosses a non-object")))?;
    }
    // Setting the watt form of a power should displace a dBm spelling and
    // vice versa.
    if let Some(base) = last.strip_suffix("_dbm") {
        cur.remove(base);
    } else {
        cur.remove(&format!("{last}_dbm"));
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
