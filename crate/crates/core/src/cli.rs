//! Command-line front end: argument parsing, `key=value` configuration,
//! deterministic CSV/JSON output and run manifests.
//!
//! Every subcommand is a pure function of its resolved parameters. CSV files
//! start with `#` comment lines echoing those parameters, use 12 significant
//! digits and LF line endings, and contain no timestamps, so reruns with the
//! same parameters reproduce identical bytes. When an output path is given,
//! a manifest `<path>.manifest.json` listing every written file with its
//! SHA-256 checksum is written beside it.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::counting::{count_csv_row, g2_estimate_clicks, simulate_hbt_with_workers, CountingConfig, COUNT_HEADER};
use crate::error::{Error, Result};
use crate::fit::fit_sweep_model;
use crate::fock::{g2_from_pn, photon_number_distribution, photon_number_distribution_auto};
use crate::format::{fmt_sig, parse_key_values};
use crate::gaussian::GaussianState;
use crate::loss::{loss_report, normal_resamples};
use crate::moments::{fig1_csv, fig1_table, g2_gaussian, weyl_moments_analytic};
use crate::rng::with_workers;
use crate::tomography::{
    estimate_covariance, g2_from_reconstruction, hwp_output, hwp_sweep, simulate_homodyne, sweep_csv_row,
    uniform_angles, HomodyneDataset, HomodyneParams, SWEEP_HEADER,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Resamples drawn by `estimate-loss` when standard errors are given.
const LOSS_RESAMPLES: usize = 2000;

#[derive(Debug, Parser)]
#[command(name = "wg2", version, about = "g2(0) of Gaussian light from Wigner-function moments")]
pub struct Cli {
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// g2 of coherent, thermal and squeezed light against mean photon number.
    Fig1(Fig1Args),
    /// Analytic g2 and Weyl moments of one state (JSON).
    G2(G2Args),
    /// Photon-number distribution of one state (CSV).
    Pn(PnArgs),
    /// Simulated two-detector coincidence counting (CSV).
    Count(CountArgs),
    /// Simulated homodyne tomography and g2 inference (JSON).
    Homodyne(HomodyneArgs),
    /// Wave-plate sweep of the twin-beam output through all three routes (CSV).
    Sweep(SweepArgs),
    /// Optical loss from a g2 value and a squeezed variance (JSON).
    EstimateLoss(LossArgs),
}

/// Exactly one state family, optionally followed by a pure loss.
#[derive(Debug, Args, Default)]
pub struct StateArgs {
    /// Coherent state with mean (x0, p0).
    #[arg(long, num_args = 2, value_names = ["X0", "P0"], allow_negative_numbers = true)]
    pub coherent: Option<Vec<f64>>,
    /// Thermal state with mean photon number NBAR.
    #[arg(long, value_name = "NBAR")]
    pub thermal: Option<f64>,
    /// Squeezed vacuum with x-variance S/2, squeezed axis at ANGLE degrees.
    #[arg(long, num_args = 2, value_names = ["S", "ANGLE"], allow_negative_numbers = true)]
    pub squeezed: Option<Vec<f64>>,
    /// Signal mode of a twin beam with squeezing R after a half-wave plate
    /// at THETA degrees.
    #[arg(long, num_args = 2, value_names = ["R", "THETA"], allow_negative_numbers = true)]
    pub hwp: Option<Vec<f64>>,
    /// State from a JSON file {"mean":[x0,p0],"cov":[vxx,vxp,vpp]}.
    #[arg(long, value_name = "FILE")]
    pub file: Option<PathBuf>,
    /// Pure loss of transmissivity ETA applied to the state.
    #[arg(long, value_name = "ETA")]
    pub attenuate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Fig1Args {
    /// Smallest mean photon number of the grid.
    #[arg(long)]
    pub n_min: Option<f64>,
    /// Largest mean photon number of the grid.
    #[arg(long)]
    pub n_max: Option<f64>,
    /// Number of log-spaced grid points.
    #[arg(long)]
    pub points: Option<usize>,
    /// Output file (stdout when omitted); a manifest is written beside it.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct G2Args {
    #[command(flatten)]
    pub state: StateArgs,
    /// Output file (stdout when omitted); a manifest is written beside it.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PnArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Largest photon number; chosen automatically when omitted.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Largest acceptable probability mass above n_max.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output file (stdout when omitted); a manifest is written beside it.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct CountingFlags {
    /// Number of detection windows (accepts `1e7`).
    #[arg(long)]
    pub n_windows: Option<f64>,
    /// Detector efficiency.
    #[arg(long)]
    pub eta_det: Option<f64>,
    /// Dark-count probability per detector and window.
    #[arg(long)]
    pub dark_prob: Option<f64>,
    /// Beam-splitter transmissivity towards detector 1.
    #[arg(long)]
    pub split: Option<f64>,
    /// Seed of the counting simulation.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Photon-number truncation of the sampled distribution.
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct HomodyneFlags {
    /// Number of equally spaced local-oscillator phases in [0, π).
    #[arg(long)]
    pub n_angles: Option<usize>,
    /// Samples per phase (accepts `1e5`).
    #[arg(long)]
    pub per_angle: Option<f64>,
    /// Homodyne detection efficiency.
    #[arg(long)]
    pub eta_hd: Option<f64>,
    /// Seed of the homodyne simulation.
    #[arg(long)]
    pub hd_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub counting: CountingFlags,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output file (stdout when omitted); a manifest is written beside it.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HomodyneArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub homodyne: HomodyneFlags,
    /// Reconstruct from a recorded dataset instead of simulating one.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Also write the simulated samples (`theta_rad,x`).
    #[arg(long, value_name = "FILE")]
    pub data_out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output file (stdout when omitted); a manifest is written beside it.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Twin-beam squeezing parameter.
    #[arg(long)]
    pub r: Option<f64>,
    /// Wave-plate angles in degrees: `a,b,c` or `start:stop:step`.
    #[arg(long)]
    pub angles: Option<String>,
    #[command(flatten)]
    pub counting: CountingFlags,
    #[command(flatten)]
    pub homodyne: HomodyneFlags,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output file (stdout when omitted); a manifest is written beside it.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Measured g2 (loss-immune).
    #[arg(long)]
    pub g2: Option<f64>,
    /// Measured squeezed-quadrature variance.
    #[arg(long)]
    pub vx: Option<f64>,
    /// Standard error of g2, propagated by resampling.
    #[arg(long)]
    pub g2_err: Option<f64>,
    /// Standard error of the variance, propagated by resampling.
    #[arg(long)]
    pub vx_err: Option<f64>,
    /// Take g2 (direct) and the squeezed variance from a sweep CSV row.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["g2", "vx"])]
    pub from: Option<PathBuf>,
    /// Wave-plate angle of the row to use with --from.
    #[arg(long, requires = "from")]
    pub theta: Option<f64>,
    /// Seed of the error-propagation resampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (stdout when omitted); a manifest is written beside it.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; messages go to stdout/stderr.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
            parse_key_values(&text)?
        }
        None => BTreeMap::new(),
    };
    let settings = Settings { config };
    match &cli.command {
        Command::Fig1(a) => cmd_fig1(a, &settings),
        Command::G2(a) => cmd_g2(a),
        Command::Pn(a) => cmd_pn(a, &settings),
        Command::Count(a) => with_workers(a.workers, || cmd_count(a, &settings)),
        Command::Homodyne(a) => with_workers(a.workers, || cmd_homodyne(a, &settings)),
        Command::Sweep(a) => with_workers(a.workers, || cmd_sweep(a, &settings)),
        Command::EstimateLoss(a) => cmd_estimate_loss(a, &settings),
    }
}

/// Values from the config file, consulted when a flag is absent.
struct Settings {
    config: BTreeMap<String, String>,
}

impl Settings {
    fn get<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.config.get(key) {
            Some(text) => text
                .parse()
                .map_err(|_| Error::Usage(format!("invalid value for {key}: {text:?}"))),
            None => Ok(default),
        }
    }

    fn opt<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self
                .config
                .get(key)
                .map(|text| {
                    text.parse()
                        .map_err(|_| Error::Usage(format!("invalid value for {key}: {text:?}")))
                })
                .transpose(),
        }
    }

    fn counting(&self, f: &CountingFlags) -> Result<CountingConfig> {
        let mut cfg = CountingConfig::default();
        cfg.apply_key_values(&self.config)?;
        if let Some(v) = f.n_windows {
            if !(v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
                return Err(Error::Usage(format!("n_windows must be a positive integer, got {v}")));
            }
            cfg.n_windows = v as u64;
        }
        cfg.eta_det = f.eta_det.unwrap_or(cfg.eta_det);
        cfg.dark_prob = f.dark_prob.unwrap_or(cfg.dark_prob);
        cfg.split = f.split.unwrap_or(cfg.split);
        cfg.seed = f.seed.unwrap_or(cfg.seed);
        cfg.n_max = f.n_max.unwrap_or(cfg.n_max);
        cfg.validate()?;
        Ok(cfg)
    }

    fn homodyne(&self, f: &HomodyneFlags) -> Result<HomodyneParams> {
        let mut p = HomodyneParams::default();
        p.apply_key_values(&self.config)?;
        p.n_angles = f.n_angles.unwrap_or(p.n_angles);
        if let Some(v) = f.per_angle {
            if !(v >= 2.0 && v.fract() == 0.0) {
                return Err(Error::Usage(format!("per_angle must be an integer >= 2, got {v}")));
            }
            p.per_angle = v as usize;
        }
        p.eta_hd = f.eta_hd.unwrap_or(p.eta_hd);
        p.seed = f.hd_seed.unwrap_or(p.seed);
        if p.n_angles < 2 {
            return Err(Error::Usage("n_angles must be >= 2".into()));
        }
        Ok(p)
    }
}

/// The resolved state and a canonical description for output headers.
fn resolve_state(a: &StateArgs) -> Result<(GaussianState, String)> {
    let chosen = [
        a.coherent.is_some(),
        a.thermal.is_some(),
        a.squeezed.is_some(),
        a.hwp.is_some(),
        a.file.is_some(),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if chosen != 1 {
        return Err(Error::Usage(format!(
            "exactly one of --coherent, --thermal, --squeezed, --hwp, --file is required ({chosen} given)"
        )));
    }
    let (state, mut desc) = if let Some(v) = &a.coherent {
        (GaussianState::coherent(v[0], v[1])?, format!("coherent {} {}", fmt_sig(v[0]), fmt_sig(v[1])))
    } else if let Some(n) = a.thermal {
        (GaussianState::thermal(n)?, format!("thermal {}", fmt_sig(n)))
    } else if let Some(v) = &a.squeezed {
        (
            GaussianState::squeezed_vacuum(v[0], v[1].to_radians())?,
            format!("squeezed {} {}", fmt_sig(v[0]), fmt_sig(v[1])),
        )
    } else if let Some(v) = &a.hwp {
        (hwp_output(v[0], v[1])?, format!("hwp {} {}", fmt_sig(v[0]), fmt_sig(v[1])))
    } else {
        let path = a.file.as_ref().expect("one flag chosen");
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read state {}: {e}", path.display())))?;
        let state: GaussianState = serde_json::from_str(&text)
            .map_err(|e| Error::Usage(format!("invalid state file {}: {e}", path.display())))?;
        (state, format!("file {}", path.display()))
    };
    let state = match a.attenuate {
        Some(eta) => {
            desc.push_str(&format!(" attenuate {}", fmt_sig(eta)));
            state.attenuate(eta)?
        }
        None => state,
    };
    Ok((state, desc))
}

/// Parses `a,b,c` or `start:stop:step` (inclusive) into degrees.
pub fn parse_angle_list(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Usage(format!("malformed angle list {text:?}"));
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    let angles = if text.contains(':') {
        let parts: Vec<f64> = text.split(':').map(num).collect::<Option<_>>().ok_or_else(bad)?;
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(bad());
        }
        (0..count).map(|k| start + k as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<Option<Vec<_>>>().ok_or_else(bad)?
    };
    if angles.is_empty() {
        return Err(bad());
    }
    Ok(angles)
}

/// Ordered parameter echo shared by CSV headers and manifests.
#[derive(Default)]
struct Params(Vec<(String, String)>);

impl Params {
    fn push(&mut self, key: &str, value: impl Into<String>) {
        self.0.push((key.to_string(), value.into()));
    }

    fn extend(&mut self, kv: Vec<(&'static str, String)>) {
        for (k, v) in kv {
            self.push(k, v);
        }
    }

    fn header(&self, subcommand: &str) -> String {
        let mut out = format!("# wg2 {VERSION} {subcommand}\n");
        for (k, v) in &self.0 {
            let _ = writeln!(out, "# {k}={v}");
        }
        out
    }

    fn to_json(&self) -> Value {
        Value::Object(self.0.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect())
    }
}

/// Record of one run: parameters, seed, version and output checksums.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: Option<u64>,
    pub parameters: Value,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output files of a run and writes them with a manifest.
struct Outputs<'a> {
    subcommand: &'a str,
    params: Params,
    seed: Option<u64>,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl<'a> Outputs<'a> {
    fn new(subcommand: &'a str, params: Params, seed: Option<u64>) -> Self {
        Outputs { subcommand, params, seed, files: Vec::new() }
    }

    fn add(&mut self, path: &Path, bytes: Vec<u8>) {
        self.files.push((path.to_path_buf(), bytes));
    }

    /// Writes `primary` to `out` (or stdout) plus any extra files, and the
    /// manifest beside `out` when given.
    fn finish(mut self, out: Option<&Path>, primary: String) -> Result<()> {
        match out {
            None => {
                for (path, bytes) in &self.files {
                    std::fs::write(path, bytes)?;
                }
                print!("{primary}");
                Ok(())
            }
            Some(path) => {
                self.files.insert(0, (path.to_path_buf(), primary.into_bytes()));
                for (p, bytes) in &self.files {
                    std::fs::write(p, bytes)?;
                }
                let manifest = RunManifest {
                    subcommand: self.subcommand.to_string(),
                    version: VERSION.to_string(),
                    seed: self.seed,
                    parameters: self.params.to_json(),
                    outputs: self
                        .files
                        .iter()
                        .map(|(p, bytes)| OutputEntry {
                            path: p.file_name().map_or_else(
                                || p.display().to_string(),
                                |n| n.to_string_lossy().into_owned(),
                            ),
                            sha256: sha256_hex(bytes),
                        })
                        .collect(),
                };
                let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
                text.push('\n');
                std::fs::write(manifest_path(path), text)?;
                Ok(())
            }
        }
    }
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn json_text(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON serializes");
    text.push('\n');
    text
}

fn cmd_fig1(a: &Fig1Args, s: &Settings) -> Result<()> {
    let n_min = s.get(a.n_min, "n_min", 0.01)?;
    let n_max = s.get(a.n_max, "n_max", 10.0)?;
    let points = s.get(a.points, "points", 100)?;
    if !(n_min > 0.0 && n_min < n_max && n_max.is_finite()) {
        return Err(Error::Usage(format!("need 0 < n_min < n_max, got {n_min}, {n_max}")));
    }
    if points < 2 {
        return Err(Error::Usage(format!("need at least 2 points, got {points}")));
    }
    let grid = log_grid(n_min, n_max, points);
    let rows = fig1_table(&grid)?;
    let mut params = Params::default();
    params.push("n_min", fmt_sig(n_min));
    params.push("n_max", fmt_sig(n_max));
    params.push("points", points.to_string());
    let text = params.header("fig1") + &fig1_csv(&rows);
    Outputs::new("fig1", params, None).finish(a.out.as_deref(), text)
}

/// `points` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| match k {
            0 => lo,
            _ if k + 1 == points => hi,
            _ => (a + (b - a) * k as f64 / (points - 1) as f64).exp(),
        })
        .collect()
}

fn cmd_g2(a: &G2Args) -> Result<()> {
    let (state, desc) = resolve_state(&a.state)?;
    let g2 = g2_gaussian(&state)?;
    let m = weyl_moments_analytic(&state);
    let mut params = Params::default();
    params.push("state", desc.clone());
    let value = json!({
        "state": desc,
        "g2": g2.value,
        "mean_photon": g2.mean_photon,
        "moments": { "nw": m.nw, "nw2": m.nw2 },
        "gaussian": state,
    });
    Outputs::new("g2", params, None).finish(a.out.as_deref(), json_text(&value))
}

fn cmd_pn(a: &PnArgs, s: &Settings) -> Result<()> {
    let (state, desc) = resolve_state(&a.state)?;
    let tol = s.get(a.tol, "tol", 1e-10)?;
    let n_max = s.opt(a.n_max, "pn_n_max")?;
    let dist = match n_max {
        Some(n) => photon_number_distribution(&state, n, tol)?,
        None => photon_number_distribution_auto(&state, tol)?,
    };
    let mut params = Params::default();
    params.push("state", desc);
    params.push("n_max", dist.n_max().to_string());
    params.push("tol", fmt_sig(tol));
    params.push("tail_mass", fmt_sig(dist.tail_mass()));
    params.push("g2", g2_from_pn(&dist).map_or_else(|_| "nan".to_string(), fmt_sig));
    let mut text = params.header("pn") + "n,p\n";
    for (n, p) in dist.probs().iter().enumerate() {
        let _ = writeln!(text, "{n},{}", fmt_sig(*p));
    }
    Outputs::new("pn", params, None).finish(a.out.as_deref(), text)
}

fn cmd_count(a: &CountArgs, s: &Settings) -> Result<()> {
    let (state, desc) = resolve_state(&a.state)?;
    let cfg = s.counting(&a.counting)?;
    let rec = simulate_hbt_with_workers(&state, &cfg, None)?;
    g2_estimate_clicks(&rec)?;
    let theta = a.state.hwp.as_ref().map(|v| v[1]);
    let mut params = Params::default();
    params.push("state", desc);
    params.extend(cfg.to_key_values());
    let text = format!("{}{COUNT_HEADER}\n{}\n", params.header("count"), count_csv_row(theta, &rec));
    Outputs::new("count", params, Some(cfg.seed)).finish(a.out.as_deref(), text)
}

fn cmd_homodyne(a: &HomodyneArgs, s: &Settings) -> Result<()> {
    let hp = s.homodyne(&a.homodyne)?;
    let mut params = Params::default();
    let mut extra = None;
    let data = match (&a.input, has_state(&a.state)) {
        (Some(_), true) => return Err(Error::Usage("--input conflicts with a state flag".into())),
        (Some(path), false) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
            params.push("input", path.display().to_string());
            HomodyneDataset::from_csv(&text)?
        }
        (None, _) => {
            let (state, desc) = resolve_state(&a.state)?;
            params.push("state", desc);
            params.extend(hp.to_key_values());
            let data = simulate_homodyne(&state, &uniform_angles(hp.n_angles), hp.per_angle, hp.eta_hd, hp.seed)?;
            if let Some(path) = &a.data_out {
                extra = Some((path.clone(), data.to_csv().into_bytes()));
            }
            data
        }
    };
    let rec = estimate_covariance(&data)?;
    let cov = rec.state.cov();
    let raw = rec.raw_cov;
    let g2 = g2_from_reconstruction(&rec);
    let mut report = json!({
        "mean": [rec.mean.x, rec.mean.p],
        "cov": [cov.vxx(), cov.vxp(), cov.vpp()],
        "raw_cov": [raw.vxx(), raw.vxp(), raw.vpp()],
        "per_angle_variance": rec.per_angle.iter().map(|m| m.variance).collect::<Vec<_>>(),
        "residual_norm": rec.residual_norm,
        "bootstrap_failures": rec.bootstrap_failures,
    });
    if let Ok(iv) = &g2 {
        report["g2"] = json!({
            "value": iv.value,
            "ci": [iv.ci_low, iv.ci_high],
            "guarded": iv.guarded,
            "members": iv.members,
        });
    }
    let mut outs = Outputs::new("homodyne", params, Some(data.seed));
    if let Some((path, bytes)) = extra {
        outs.add(&path, bytes);
    }
    outs.finish(a.out.as_deref(), json_text(&report))?;
    g2.map(|_| ())
}

fn has_state(a: &StateArgs) -> bool {
    a.coherent.is_some() || a.thermal.is_some() || a.squeezed.is_some() || a.hwp.is_some() || a.file.is_some()
}

fn cmd_sweep(a: &SweepArgs, s: &Settings) -> Result<()> {
    let r = s.get(a.r, "r", 0.3)?;
    let angles_text = match &a.angles {
        Some(t) => t.clone(),
        None => s.config.get("angles").cloned().unwrap_or_else(|| "0:45:5".into()),
    };
    let thetas = parse_angle_list(&angles_text)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Usage(format!("r must be > 0, got {r}")));
    }
    let cfg = s.counting(&a.counting)?;
    let hp = s.homodyne(&a.homodyne)?;
    let rows = hwp_sweep(r, &thetas, &cfg, &hp)?;

    let mut params = Params::default();
    params.push("r", fmt_sig(r));
    params.push("angles", angles_text);
    params.extend(cfg.to_key_values());
    params.extend(hp.to_key_values());
    for (name, col) in [
        ("fit_direct", rows.iter().map(|r| (r.theta_deg, r.g2_direct)).collect::<Vec<_>>()),
        ("fit_homodyne", rows.iter().map(|r| (r.theta_deg, r.g2_homodyne)).collect()),
    ] {
        let pts: Vec<(f64, f64)> = col.into_iter().filter(|p| p.1.is_finite()).collect();
        if let Ok(f) = fit_sweep_model(&pts) {
            params.push(name, format!("a={} b={} c={}", fmt_sig(f.a), fmt_sig(f.b), fmt_sig(f.c)));
        }
    }
    let mut text = params.header("sweep") + SWEEP_HEADER + "\n";
    for row in &rows {
        text.push_str(&sweep_csv_row(row));
        text.push('\n');
    }
    Outputs::new("sweep", params, Some(cfg.seed)).finish(a.out.as_deref(), text)
}

/// `(g2_direct, g2_direct_err, squeezed variance)` of the sweep row at
/// `theta` (or the only row).
pub fn sweep_row_inputs(csv: &str, theta: Option<f64>) -> Result<(f64, f64, f64)> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Usage("sweep file has no header".into()))?
        .split(',')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Usage(format!("sweep file lacks column {name}")))
    };
    let (ct, cg, ce, cx, cp) = (col("theta_deg")?, col("g2_direct")?, col("g2_direct_err")?, col("vx")?, col("vp")?);
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.trim().parse::<f64>().unwrap_or(f64::NAN)).collect())
        .collect();
    if rows.iter().any(|r| r.len() != header.len()) {
        return Err(Error::Usage("sweep file rows do not match the header".into()));
    }
    let row = match theta {
        Some(t) => rows
            .iter()
            .find(|r| (r[ct] - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| Error::Usage(format!("no sweep row at theta = {t}")))?,
        None if rows.len() == 1 => &rows[0],
        None => return Err(Error::Usage("sweep file has several rows; select one with --theta".into())),
    };
    Ok((row[cg], row[ce], row[cx].min(row[cp])))
}

fn cmd_estimate_loss(a: &LossArgs, s: &Settings) -> Result<()> {
    let seed = s.get(a.seed, "seed", 0)?;
    let mut params = Params::default();
    let (g2, mut g2_err, vx) = match &a.from {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
            params.push("from", path.display().to_string());
            if let Some(t) = a.theta {
                params.push("theta", fmt_sig(t));
            }
            let (g, e, v) = sweep_row_inputs(&text, a.theta)?;
            (g, Some(e), v)
        }
        None => {
            let g2 = s
                .opt(a.g2, "g2")?
                .ok_or_else(|| Error::Usage("--g2 and --vx (or --from) are required".into()))?;
            let vx = s
                .opt(a.vx, "vx")?
                .ok_or_else(|| Error::Usage("--g2 and --vx (or --from) are required".into()))?;
            (g2, None, vx)
        }
    };
    if let Some(e) = a.g2_err {
        g2_err = Some(e);
    }
    let vx_err = a.vx_err;
    params.push("g2", fmt_sig(g2));
    params.push("vx", fmt_sig(vx));
    let mut notes = Vec::new();
    let resamples = if g2_err.is_some() || vx_err.is_some() {
        if vx_err.is_none() {
            notes.push("variance uncertainty not supplied; eta_ci reflects g2 uncertainty only".to_string());
        }
        if g2_err.is_none() {
            notes.push("g2 uncertainty not supplied; eta_ci reflects variance uncertainty only".to_string());
        }
        let (ge, ve) = (g2_err.unwrap_or(0.0), vx_err.unwrap_or(0.0));
        params.push("g2_err", fmt_sig(ge));
        params.push("vx_err", fmt_sig(ve));
        params.push("seed", seed.to_string());
        normal_resamples((g2, ge), (vx, ve), LOSS_RESAMPLES, seed)?
    } else {
        Vec::new()
    };
    let mut report = loss_report(g2, vx, &resamples)?;
    report.warnings.extend(notes);
    let value = serde_json::to_value(&report).expect("report serializes");
    Outputs::new("estimate-loss", params, Some(seed)).finish(a.out.as_deref(), json_text(&value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_lists() {
        assert_eq!(parse_angle_list("0,5,10").unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_angle_list("0:45:5").unwrap().len(), 10);
        assert_eq!(parse_angle_list("0:0.3:0.1").unwrap().len(), 4);
        for bad in ["", "0,,5", "a", "0:45", "0:45:0", "45:0:5", "1:2:3:4", "0,nan"] {
            assert!(matches!(parse_angle_list(bad), Err(Error::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.01, 10.0, 100);
        assert_eq!((g[0], g[99]), (0.01, 10.0));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn state_flags_are_exclusive() {
        let none = StateArgs::default();
        assert!(matches!(resolve_state(&none), Err(Error::Usage(_))));
        let two = StateArgs { thermal: Some(1.0), squeezed: Some(vec![0.5, 0.0]), ..Default::default() };
        assert!(matches!(resolve_state(&two), Err(Error::Usage(_))));
        let one = StateArgs { thermal: Some(1.0), attenuate: Some(0.5), ..Default::default() };
        let (s, desc) = resolve_state(&one).unwrap();
        assert_eq!(desc, "thermal 1 attenuate 0.5");
        assert!((s.mean_photon() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sweep_row_selection() {
        let csv = "# c\ntheta_deg,g2_analytic,g2_direct,g2_direct_err,g2_homodyne,g2_ci_low,g2_ci_high,vx,vp\n\
                   0,2,2.1,0.1,2,1.9,2.1,0.8,0.8\n22.5,14,13.5,0.4,14,13,15,0.3,0.9\n";
        assert_eq!(sweep_row_inputs(csv, Some(22.5)).unwrap(), (13.5, 0.4, 0.3));
        assert!(sweep_row_inputs(csv, None).is_err());
        assert!(sweep_row_inputs(csv, Some(10.0)).is_err());
    }

    #[test]
    fn manifest_sits_beside_output() {
        assert_eq!(manifest_path(Path::new("/tmp/a/sweep.csv")), PathBuf::from("/tmp/a/sweep.csv.manifest.json"));
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
