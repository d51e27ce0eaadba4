use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use cogmimo_core::analysis::RECURSION_GUARD;
use cogmimo_core::harness::{
    analyze_campaign, compare_summaries, read_summary_csv, run_campaign, sweep, write_summary_csv, write_trials_csv,
    Axis, CampaignPlan, CampaignSummary, Deviation, SummaryRow, SweepPoint,
};
use cogmimo_core::model::apply_override;
use cogmimo_core::select::{Algorithm, EXHAUSTIVE_GUARD};
use cogmimo_core::{Error, NetworkConfig};

const TRIALS_CSV: &str = "trials.csv";
const SUMMARY_CSV: &str = "summary.csv";
const ANALYSIS_CSV: &str = "analysis.csv";
const COMPARISON_CSV: &str = "comparison.csv";
const ECHO_JSON: &str = "config-echo.json";

/// Keys of a config file that describe the campaign rather than the network.
const CAMPAIGN_KEYS: [&str; 4] = ["locations", "channels", "oracle", "sweep"];

#[derive(Parser)]
#[command(name = "cogmimo", version, about = "User selection for massive-MIMO underlay cognitive radio")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo campaign: trials.csv, summary.csv and a config echo.
    Simulate(Common),
    /// Closed-form predictions averaged over the location draws (K <= 10).
    Analyze(Common),
    /// Analysis against simulation with per-metric acceptance bands.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Reuse the summary.csv of an earlier `simulate` run in DIR.
        #[arg(long, value_name = "DIR")]
        simulation: Option<PathBuf>,
    },
    /// One campaign per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// M, I0 (dBm), R0-scale, L, K, eps1-scale or eps2-scale.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Campaign with the exhaustive and P2 oracles; checks the ordering
    /// |S2*| <= |S1*| <= |S*| and DMP-without-update = P2 on every trial.
    Oracle(Common),
    /// Parse and validate a config, then print it fully resolved.
    Validate {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Override a config key, e.g. `--set M=256` or `--set I0_dbm=-100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Replace existing output files.
    #[arg(long)]
    force: bool,
    #[arg(long, value_enum)]
    oracle: Option<Switch>,
    #[arg(long)]
    locations: Option<u64>,
    #[arg(long)]
    channels: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

enum Failure {
    Usage(String),
    Core(Error),
    Gate(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Gate(_) => 1,
            Failure::Core(e) if e.is_numeric() => 3,
            Failure::Usage(_) | Failure::Core(_) => 2,
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// A config file resolved against overrides and flags.
struct Loaded {
    config: NetworkConfig,
    plan: CampaignPlan,
    sweep: Option<Value>,
}

fn read_raw(path: &Path, overrides: &[String]) -> Outcome<Map<String, Value>> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{} is not valid JSON: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(Failure::Usage(format!("{} must hold a JSON object", path.display())));
    };
    for o in overrides {
        apply_override(&mut map, o)?;
    }
    Ok(map)
}

fn load(common: &Common) -> Outcome<Loaded> {
    let mut map = read_raw(&common.config, &common.overrides)?;
    let mut take_count = |key: &str| -> Outcome<Option<u64>> {
        match map.remove(key) {
            None => Ok(None),
            Some(v) => {
                v.as_u64().map(Some).ok_or_else(|| Failure::Usage(format!("`{key}` must be a positive integer")))
            }
        }
    };
    let desk = CampaignPlan::desk();
    let locations = common.locations.or(take_count("locations")?).unwrap_or(desk.locations);
    let channels = common.channels.or(take_count("channels")?).unwrap_or(desk.channels);
    let file_oracle = match map.remove("oracle") {
        None => None,
        Some(Value::Bool(b)) => Some(b),
        Some(_) => return Err(Failure::Usage("`oracle` must be true or false".into())),
    };
    let oracle = match common.oracle {
        Some(Switch::On) => true,
        Some(Switch::Off) => false,
        None => file_oracle.unwrap_or(false),
    };
    let sweep = map.remove("sweep");
    let mut config = NetworkConfig::from_json_value(Value::Object(map))?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let config = config.validated()?;
    Ok(Loaded { config, plan: CampaignPlan { locations, channels, jobs: common.jobs, oracle }, sweep })
}

/// Resolved config plus campaign settings; loading it back with `--config`
/// reruns the same campaign.
fn echo(loaded: &Loaded, sweep: Option<Value>) -> Value {
    let mut v = serde_json::to_value(&loaded.config).expect("config serializes");
    let map = v.as_object_mut().expect("config is an object");
    map.insert("locations".into(), loaded.plan.locations.into());
    map.insert("channels".into(), loaded.plan.channels.into());
    map.insert("oracle".into(), loaded.plan.oracle.into());
    if let Some(s) = sweep {
        map.insert("sweep".into(), s);
    }
    v
}

/// Create `out` and refuse to clobber any of `names` unless forced.
fn prepare(out: &Path, names: &[&str], force: bool) -> Outcome<()> {
    fs::create_dir_all(out).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", out.display())))?;
    if !force {
        let existing: Vec<String> =
            names.iter().map(|n| out.join(n)).filter(|p| p.exists()).map(|p| p.display().to_string()).collect();
        if !existing.is_empty() {
            return Err(Failure::Usage(format!("refusing to overwrite {} (pass --force)", existing.join(", "))));
        }
    }
    Ok(())
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn write_echo(out: &Path, value: &Value) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value).expect("echo serializes");
    fs::write(out.join(ECHO_JSON), text + "\n")
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", out.join(ECHO_JSON).display())))
}

fn print_rows(rows: &[SummaryRow]) {
    let shown = ["cardinality", "k_star_star", "sum_power_w", "max_il_w", "mean_il_w"];
    println!("{:<10} {:<12} {:>14} {:>12} {:>7}", "algo", "metric", "mean", "stderr", "n");
    for r in rows.iter().filter(|r| shown.contains(&r.metric.as_str())) {
        println!("{:<10} {:<12} {:>14.6e} {:>12.3e} {:>7}", r.algo, r.metric, r.mean, r.stderr, r.n);
    }
}

fn simulate(common: &Common) -> Outcome {
    let loaded = load(common)?;
    prepare(&common.out, &[TRIALS_CSV, SUMMARY_CSV, ECHO_JSON], common.force)?;
    let campaign = run_campaign(&loaded.config, &loaded.plan)?;
    write_trials_csv(&campaign.trials, create(&common.out.join(TRIALS_CSV))?)?;
    write_summary_csv(&campaign.summary.rows, create(&common.out.join(SUMMARY_CSV))?)?;
    write_echo(&common.out, &echo(&loaded, None))?;
    println!(
        "config {} | {} locations x {} channels",
        loaded.config.fingerprint(),
        loaded.plan.locations,
        loaded.plan.channels
    );
    print_rows(&campaign.summary.rows);
    Ok(())
}

fn analysis_for(loaded: &Loaded) -> Outcome<CampaignSummary> {
    if loaded.config.users > RECURSION_GUARD {
        return Err(Failure::Usage(format!(
            "exact analysis is limited to K <= {RECURSION_GUARD} (got K = {}); use `simulate` for larger K",
            loaded.config.users
        )));
    }
    Ok(analyze_campaign(&loaded.config, &loaded.plan)?)
}

fn analyze(common: &Common) -> Outcome {
    let loaded = load(common)?;
    let summary = analysis_for(&loaded)?;
    prepare(&common.out, &[ANALYSIS_CSV, ECHO_JSON], common.force)?;
    write_summary_csv(&summary.rows, create(&common.out.join(ANALYSIS_CSV))?)?;
    write_echo(&common.out, &echo(&loaded, None))?;
    println!("config {} | {} locations", loaded.config.fingerprint(), loaded.plan.locations);
    print_rows(&summary.rows);
    Ok(())
}

fn compare(common: &Common, simulation: Option<&Path>) -> Outcome {
    let loaded = load(common)?;
    let analysis = analysis_for(&loaded)?;
    let sim_rows = match simulation {
        Some(dir) => {
            let path = dir.join(SUMMARY_CSV);
            let file = File::open(&path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            read_summary_csv(file)?
        }
        None => run_campaign(&loaded.config, &loaded.plan)?.summary.rows,
    };
    let deviations = compare_summaries(&analysis.rows, &sim_rows)?;
    prepare(&common.out, &[COMPARISON_CSV, ECHO_JSON], common.force)?;
    let mut w = csv::Writer::from_writer(create(&common.out.join(COMPARISON_CSV))?);
    for d in &deviations {
        w.serialize(d).map_err(Error::from)?;
    }
    w.flush().map_err(|e| Failure::Usage(format!("cannot write {COMPARISON_CSV}: {e}")))?;
    write_echo(&common.out, &echo(&loaded, None))?;
    report(&deviations)
}

fn report(deviations: &[Deviation]) -> Outcome {
    println!(
        "{:<10} {:<12} {:>12} {:>12} {:>12} {:>12}  verdict",
        "algo", "metric", "analysis", "simulation", "|diff|", "band"
    );
    for d in deviations {
        println!(
            "{:<10} {:<12} {:>12.5e} {:>12.5e} {:>12.3e} {:>12.3e}  {}",
            d.algo,
            d.metric,
            d.analysis,
            d.simulation,
            d.abs_deviation,
            d.band,
            if d.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = deviations.iter().filter(|d| !d.pass).count();
    if failed > 0 {
        return Err(Failure::Gate(format!("{failed} of {} deviations outside their band", deviations.len())));
    }
    Ok(())
}

fn sweep_cmd(common: &Common, axis: Option<&str>, values: &[f64]) -> Outcome {
    let loaded = load(common)?;
    let file = loaded.sweep.as_ref();
    let axis_name = match axis {
        Some(a) => a.to_string(),
        None => file
            .and_then(|s| s.get("axis"))
            .and_then(Value::as_str)
            .ok_or_else(|| Failure::Usage("sweep needs --axis or a `sweep.axis` key in the config".into()))?
            .to_string(),
    };
    let values: Vec<f64> = if !values.is_empty() {
        values.to_vec()
    } else {
        file.and_then(|s| s.get("values"))
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .unwrap_or_default()
    };
    let axis = Axis::parse(&axis_name)?;
    if values.is_empty() {
        return Err(Failure::Usage("sweep needs --values or a `sweep.values` array in the config".into()));
    }
    prepare(&common.out, &[SUMMARY_CSV, ECHO_JSON], common.force)?;
    let points = sweep(&loaded.config, axis, &values, &loaded.plan)?;
    let mut rows = Vec::new();
    for p in &points {
        if let SweepPoint::Skipped { value, reason } = p {
            eprintln!("warning: {}={value} skipped: {reason}", axis.name());
        }
        rows.extend(p.rows(&loaded.config, axis));
    }
    write_summary_csv(&rows, create(&common.out.join(SUMMARY_CSV))?)?;
    let spec = serde_json::json!({ "axis": axis.name(), "values": values });
    write_echo(&common.out, &echo(&loaded, Some(spec)))?;
    println!("{:<12} {:<10} {:>10} {:>10}", axis.name(), "algo", "K*", "K**");
    for p in &points {
        if let SweepPoint::Done { value, campaign } = p {
            for a in [Algorithm::Dmp, Algorithm::DmpNvu, Algorithm::Mdml] {
                let s = &campaign.summary;
                println!(
                    "{:<12} {:<10} {:>10.4} {:>10.4}",
                    value,
                    a.tag(),
                    s.mean(a, "cardinality"),
                    s.mean(a, "k_star_star")
                );
            }
        }
    }
    Ok(())
}

fn oracle(common: &Common) -> Outcome {
    let mut loaded = load(common)?;
    loaded.plan.oracle = true;
    if loaded.config.users > EXHAUSTIVE_GUARD {
        return Err(Failure::Usage(format!(
            "exhaustive search is limited to K <= {EXHAUSTIVE_GUARD} (got K = {})",
            loaded.config.users
        )));
    }
    prepare(&common.out, &[TRIALS_CSV, SUMMARY_CSV, ECHO_JSON], common.force)?;
    let campaign = run_campaign(&loaded.config, &loaded.plan)?;
    write_trials_csv(&campaign.trials, create(&common.out.join(TRIALS_CSV))?)?;
    write_summary_csv(&campaign.summary.rows, create(&common.out.join(SUMMARY_CSV))?)?;
    write_echo(&common.out, &echo(&loaded, None))?;

    let (mut gap1, mut gap2, mut order, mut p2) = (0usize, 0usize, 0usize, 0usize);
    for t in &campaign.trials {
        let card = |a| t.get(a).map_or(0, |r| r.cardinality);
        let (opt, s1, s2) = (card(Algorithm::Optimal), card(Algorithm::Dmp), card(Algorithm::DmpNvu));
        gap1 += opt.saturating_sub(s1);
        gap2 += opt.saturating_sub(s2);
        order += usize::from(!(s2 <= s1 && s1 <= opt));
        p2 += usize::from(s2 != card(Algorithm::P2));
    }
    let n = campaign.trials.len() as f64;
    println!("trials                     {}", campaign.trials.len());
    println!("mean |S*| - |S1*|          {:.4}", gap1 as f64 / n);
    println!("mean |S*| - |S2*|          {:.4}", gap2 as f64 / n);
    println!("ordering violations        {order}");
    println!("P2 mismatches              {p2}");
    if order + p2 > 0 {
        return Err(Failure::Gate(format!("{order} ordering violations, {p2} P2 mismatches")));
    }
    Ok(())
}

fn validate(config: &Path, overrides: &[String]) -> Outcome {
    let map = read_raw(config, overrides)?;
    let network: Map<String, Value> = map.into_iter().filter(|(k, _)| !CAMPAIGN_KEYS.contains(&k.as_str())).collect();
    let cfg = NetworkConfig::from_json_value(Value::Object(network))?.validated()?;
    println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
    println!("budget_w {:e}", cfg.budget());
    println!("fingerprint {}", cfg.fingerprint());
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Analyze(c) => analyze(c),
        Command::Compare { common, simulation } => compare(common, simulation.as_deref()),
        Command::Sweep { common, axis, values } => sweep_cmd(common, axis.as_deref(), values),
        Command::Oracle(c) => oracle(c),
        Command::Validate { config, overrides } => validate(config, overrides),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Gate(m) => eprintln!("error: {m}"),
                Failure::Core(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
