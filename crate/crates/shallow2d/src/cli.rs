//! Command-line experiment harness.
//!
//! Every run is described by an [`ExperimentConfig`], built from defaults,
//! then an optional JSON file (`--config`), then command-line flags. The
//! config (minus its output path) is hashed with SHA-256; the hash and the
//! crate version head every output file and every row carries the seed and
//! the hash. Parallel work is split into tasks with their own derived RNG
//! streams and merged in task order, so the worker count never changes the
//! output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::architecture::{brickwork_layout, chr_layout, chr_layout_rect, extended_brickwork_layout, CircuitInstance, CircuitLayout, Family, Site};
use crate::effective1d::{self, alg3_distribution, bases_from_instance, default_i_star, spectrum_fit, toy_model_run};
use crate::error::{Error, Result};
use crate::mps::TruncationPolicy;
use crate::oracle::{simulate_exact, DEFAULT_CAP_BITS};
use crate::patching::{self, marginal_distribution, PatchEngine};
use crate::rng;
use crate::sebd::{self, distribution_certificate, family_layout, sebd_distribution, sebd_log_probability, ScanSpec};
use crate::statmech;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Jsonl,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub subcommand: String,
    pub arch: Family,
    /// Linear size `L` (rows of the extended brickwork).
    pub size: usize,
    /// Explicit lattice shape, overriding `size` where supported.
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub sizes: Vec<usize>,
    pub q: usize,
    pub r: usize,
    pub v: usize,
    pub eps: f64,
    pub max_bond: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
    /// `sample`: reuse one gate instance for every trial.
    pub fixed_instance: bool,
    /// `prob`: row-major outcome string.
    pub outcome: Option<String>,
    /// Toy-model chain length.
    pub n: usize,
    pub theta: f64,
    pub steps: Option<usize>,
    pub spectrum_len: usize,
    pub record_stride: usize,
    pub i_min: Option<usize>,
    pub eps_grid: Vec<f64>,
    pub delta: f64,
    /// Patching lengthscale.
    pub l: usize,
    /// Skip the `l > 2d` check.
    pub relaxed: bool,
    pub separations: Vec<usize>,
    /// Scan window (final iterations averaged).
    pub window: usize,
    pub heights: Vec<usize>,
    pub measured_cols: usize,
    pub open_cols: usize,
    pub sweeps: usize,
    pub confidence: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            subcommand: String::new(),
            arch: Family::Brickwork,
            size: 4,
            rows: None,
            cols: None,
            sizes: vec![9, 17, 25],
            q: 2,
            r: 1,
            v: 1,
            eps: 1e-8,
            max_bond: None,
            trials: 1,
            seed: 0,
            output: None,
            format: Format::Jsonl,
            fixed_instance: false,
            outcome: None,
            n: 200,
            theta: std::f64::consts::FRAC_PI_4,
            steps: None,
            spectrum_len: 256,
            record_stride: 0,
            i_min: None,
            eps_grid: vec![1e-2, 1e-4, 1e-6, 1e-8, 1e-10],
            delta: 0.1,
            l: 3,
            relaxed: false,
            separations: vec![1, 2, 3, 4, 5, 6],
            window: 4,
            heights: vec![2, 3, 4],
            measured_cols: 2,
            open_cols: 2,
            sweeps: 2000,
            confidence: 0.95,
        }
    }
}

impl ExperimentConfig {
    /// Hex SHA-256 of the canonical JSON of the config without its output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let s = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn policy(&self) -> Result<TruncationPolicy> {
        TruncationPolicy::new(self.eps, self.max_bond)
    }

    /// Layout named by `arch` at `size`, or at `rows x cols` when given.
    pub fn layout(&self) -> Result<CircuitLayout> {
        match (self.rows, self.cols) {
            (Some(r), Some(c)) => match self.arch {
                Family::Brickwork => brickwork_layout(r, c, self.q),
                Family::Chr => chr_layout_rect(r, c),
                Family::ExtendedBrickwork => Err(Error::InvalidArgument("extended brickwork takes size, r and v".into())),
            },
            (None, None) => family_layout(self.arch, self.size, self.q, self.r, self.v),
            _ => Err(Error::InvalidArgument("give both rows and cols".into())),
        }
    }
}

/// Flags mirroring [`ExperimentConfig`]; unset flags keep the value from
/// the config file or the default.
#[derive(clap::Args, Clone, Debug, Default)]
pub struct Flags {
    #[arg(long)]
    pub arch: Option<Family>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub v: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_bond: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub fixed_instance: bool,
    #[arg(long)]
    pub outcome: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub spectrum_len: Option<usize>,
    #[arg(long)]
    pub record_stride: Option<usize>,
    #[arg(long)]
    pub i_min: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub relaxed: bool,
    #[arg(long, value_delimiter = ',')]
    pub separations: Option<Vec<usize>>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub heights: Option<Vec<usize>>,
    #[arg(long)]
    pub measured_cols: Option<usize>,
    #[arg(long)]
    pub open_cols: Option<usize>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub confidence: Option<f64>,
}

impl Flags {
    fn apply(self, c: &mut ExperimentConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { c.$f = v; } )*};
        }
        set!(arch, size, sizes, q, r, v, eps, trials, seed, format, n, theta, spectrum_len, record_stride, eps_grid, delta, l, separations, window, heights, measured_cols, open_cols, sweeps, confidence);
        macro_rules! set_opt {
            ($($f:ident),*) => {$( if self.$f.is_some() { c.$f = self.$f; } )*};
        }
        set_opt!(rows, cols, max_bond, output, outcome, steps, i_min);
        c.fixed_instance |= self.fixed_instance;
        c.relaxed |= self.relaxed;
    }
}

#[derive(Parser, Debug)]
#[command(name = "shallow2d", version, about = "Shallow 2D random circuit experiments")]
pub struct Cli {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "SHALLOW2D_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// SEBD samples with truncation logs and error certificates.
    Sample(Flags),
    /// SEBD estimate of the probability of one outcome string.
    Prob(Flags),
    /// Half-chain entropies along SEBD sweeps, per lattice size.
    EntanglementScan(Flags),
    /// Toy-model trajectories: entropies and half-chain spectra.
    ToyModel(Flags),
    /// Spectrum fits and rank/epsilon tradeoff over toy-model runs.
    SpectrumFit(Flags),
    /// Samples stitched from patches.
    PatchSample(Flags),
    /// Conditional mutual information against separation.
    CmiScan(Flags),
    /// Effective Ising couplings and critical points.
    StatmechCouplings(Flags),
    /// Second-moment quasi-entropies from the spin models.
    StatmechZ2(Flags),
    /// Oracle-equivalence checks on small instances.
    Validate(Flags),
}

impl Command {
    fn split(self) -> (&'static str, Flags) {
        match self {
            Command::Sample(f) => ("sample", f),
            Command::Prob(f) => ("prob", f),
            Command::EntanglementScan(f) => ("entanglement-scan", f),
            Command::ToyModel(f) => ("toy-model", f),
            Command::SpectrumFit(f) => ("spectrum-fit", f),
            Command::PatchSample(f) => ("patch-sample", f),
            Command::CmiScan(f) => ("cmi-scan", f),
            Command::StatmechCouplings(f) => ("statmech-couplings", f),
            Command::StatmechZ2(f) => ("statmech-z2", f),
            Command::Validate(f) => ("validate", f),
        }
    }
}

/// Rows produced by a run; `ok` is false when a validation check failed.
#[derive(Clone, Debug)]
pub struct Report {
    pub rows: Vec<Value>,
    pub ok: bool,
}

/// Merges file and flags into the config a command line describes.
pub fn resolve(cli_config: Option<&std::path::Path>, command: Command) -> Result<ExperimentConfig> {
    let (name, flags) = command.split();
    let mut cfg = match cli_config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| Error::InvalidArgument(format!("config {}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if !cfg.subcommand.is_empty() && cfg.subcommand != name {
        return Err(Error::InvalidArgument(format!("config is for {:?}, command is {name:?}", cfg.subcommand)));
    }
    cfg.subcommand = name.to_string();
    flags.apply(&mut cfg);
    validate_config(&cfg)?;
    Ok(cfg)
}

fn validate_config(c: &ExperimentConfig) -> Result<()> {
    if c.trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    if c.q < 2 {
        return Err(Error::InvalidArgument("q must be at least 2".into()));
    }
    if !(c.confidence > 0.0 && c.confidence < 1.0) {
        return Err(Error::InvalidArgument("confidence must lie in (0, 1)".into()));
    }
    c.policy()?;
    Ok(())
}

fn outcome_string(x: &[usize], q: usize) -> String {
    if q <= 10 {
        x.iter().map(|d| char::from(b'0' + *d as u8)).collect()
    } else {
        x.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
    }
}

fn parse_outcome(s: &str, n: usize) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("cannot parse outcome {s:?}"));
    let x: Vec<usize> = if s.contains(',') {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    } else {
        s.chars().map(|ch| ch.to_digit(10).map(|d| d as usize).ok_or_else(bad)).collect::<Result<_>>()?
    };
    if x.len() != n {
        return Err(Error::InvalidArgument(format!("outcome has {} entries for {n} sites", x.len())));
    }
    Ok(x)
}

/// Runs the subcommand named in `cfg`.
pub fn execute(cfg: &ExperimentConfig) -> Result<Report> {
    let rows = match cfg.subcommand.as_str() {
        "sample" => run_sample(cfg)?,
        "prob" => run_prob(cfg)?,
        "entanglement-scan" => run_scan(cfg)?,
        "toy-model" => run_toy(cfg)?,
        "spectrum-fit" => run_spectrum_fit(cfg)?,
        "patch-sample" => run_patch_sample(cfg)?,
        "cmi-scan" => run_cmi_scan(cfg)?,
        "statmech-couplings" => run_couplings(cfg)?,
        "statmech-z2" => run_z2(cfg)?,
        "validate" => {
            let rows = run_validate(cfg)?;
            let ok = rows.iter().all(|r| r["pass"] == Value::Bool(true));
            return Ok(Report { rows, ok });
        }
        other => return Err(Error::InvalidArgument(format!("unknown subcommand {other:?}"))),
    };
    Ok(Report { rows, ok: true })
}

fn run_sample(cfg: &ExperimentConfig) -> Result<Vec<Value>> {
    let layout = cfg.layout()?;
    let policy = cfg.policy()?;
    let samples: Vec<Result<sebd::SebdSample>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let gate_seed = rng::derive_seed(cfg.seed, if cfg.fixed_instance { 0 } else { i as u64 });
            let inst = CircuitInstance::sample(layout.clone(), gate_seed);
            let mut m = rng::tagged(cfg.seed, rng::domain::MEASURE, i as u64);
            sebd::sebd_sample(&inst, &policy, &mut m)
        })
        .collect();
    let samples: Vec<sebd::SebdSample> = samples.into_iter().collect::<Result<_>>()?;
    let mut rows: Vec<Value> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let cert = sebd::error_certificate(&s.log, 0.0);
            json!({
                "kind": "sample",
                "trial": i,
                "gate_seed": s.seed,
                "outcome": s.outcome.as_ref().map(|x| outcome_string(x, layout.q)),
                "failed": s.failed(),
                "max_bond": s.max_bond,
                "eps_total": s.log.eps_total(),
                "sqrt_sum": cert.sqrt_term,
                "lambda_bound": cert.lambda_bound,
            })
        })
        .collect();
    let cert = sebd::trial_certificate(&samples, cfg.confidence)?;
    rows.push(json!({
        "kind": "summary",
        "trials": samples.len(),
        "failures": samples.iter().filter(|s| s.failed()).count(),
        "tv_bound": cert.tv_bound,
        "sqrt_sum": cert.sqrt_term,
        "failure_bound": cert.failure_term,
        "lambda_bound": cert.lambda_bound,
        "confidence": cfg.confidence,
        "uniform_bound": sebd::uniform_bound(&policy, layout.rows, layout.cols, cert.failure_term),
    }));
    Ok(rows)
}

fn run_prob(cfg: &ExperimentConfig) -> Result<Vec<Value>> {
    let layout = cfg.layout()?;
    let s = cfg.outcome.as_deref().ok_or_else(|| Error::InvalidArgument("prob needs --outcome".into()))?;
    let x = parse_outcome(s, layout.n_sites())?;
    let gate_seed = rng::derive_seed(cfg.seed, 0);
    let inst = CircuitInstance::sample(layout.clone(), gate_seed);
    let lp = sebd_log_probability(&inst, &cfg.policy()?, &x)?;
    let exact = if crate::oracle::check_cap(layout.n_sites(), layout.q, DEFAULT_CAP_BITS).is_ok() {
        Some(simulate_exact(&inst)?.probabilities().prob(&x))
    } else {
        None
    };
    Ok(vec![json!({
        "gate_seed": gate_seed,
        "outcome": outcome_string(&x, layout.q),
        "probability": lp.map_or(0.0, f64::exp),
        "log_probability": lp,
        "exact_probability": exact,
    })])
}

fn run_scan(cfg: &ExperimentConfig) -> Result<Vec<Value>> {
    let spec = ScanSpec {
        family: cfg.arch,
        sizes: cfg.sizes.clone(),
        trials: cfg.trials,
        policy: cfg.policy()?,
        seed: cfg.seed,
        q: cfg.q,
        r: cfg.r,
        v: cfg.v,
        window: cfg.window,
    };
    let (_, summaries) = sebd::entanglement_scan(&spec)?;
    summaries.iter().map(|s| serde_json::to_value(s).map_err(Error::from)).collect()
}

fn toy_runs(cfg: &ExperimentConfig, spectrum_len: usize) -> Result<Vec<effective1d::DynamicsTrace>> {
    let steps = cfg.steps.unwrap_or(cfg.n);
    if steps < cfg.n / 2 {
        return Err(Error::InvalidArgument(format!("toy model needs at least n/2 = {} steps", cfg.n / 2)));
    }
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::tagged(cfg.seed, rng::domain::TASK, i as u64);
            toy_model_run(cfg.n, cfg.theta, steps, spectrum_len, cfg.record_stride, &mut r)
        })
        .collect()
}

fn run_toy(cfg: &ExperimentConfig) -> Result<Vec<Value>> {
    let traces = toy_runs(cfg, cfg.spectrum_len)?;
    let mut rows = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        for (step, s) in t.entropies.iter().enumerate() {
            rows.push(json!({"kind": "entropy", "trial": i, "step": step, "entropy": s}));
        }
        for (step, cut, index, lambda) in effective1d::trace_rows(t) {
            rows.push(json!({"kind": "spectrum", "trial": i, "step": step, "cut": cut, "index": index, "lambda": lambda}));
        }
    }
    Ok(rows)
}

fn run_spectrum_fit(cfg: &ExperimentConfig) -> Result<Vec<Value>> {
    let traces = toy_runs(cfg, cfg.spectrum_len)?;
    let i_min = cfg.i_min.unwrap_or_else(|| default_i_star(cfg.n).max(2));
    let mut rows = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        let sp = &t.spectra.last().ok_or_else(|| Error::InvalidArgument("spectrum_len must be positive".into()))?.1;
        let f = spectrum_fit(sp, i_min)?;
        rows.push(json!({
            "kind": "fit",
            "trial": i,
            "i_min": i_min,
            "slope": f.log_squared.slope,
            "intercept": f.log_squared.intercept,
            "r_squared": f.log_squared.r_squared,
            "power_law_r_squared": f.power_law.r_squared,
            "n_points": f.log_squared.n_points,
        }));
    }
    let states: Vec<_> = traces.into_iter().map(|t| t.final_state).collect();
    for row in effective1d::rank_epsilon_tradeoff(&states, &cfg.eps_grid, cfg.delta, 1 << 20) {
        rows.push(json!({"kind": "tradeoff", "eps": row.eps, "delta": row.delta, "rank": row.rank}));
    }
    Ok(rows)
}

fn run_patch_sample(cfg: &ExperimentConfig) -> Result<Vec<Value>> {
    let layout = cfg.layout()?;
    let plan = if cfg.relaxed { patching::plan_patches_relaxed(layout.rows, layout.cols, cfg.l)? } else { patching::plan_patches(&layout, cfg.l)? };
    let out: Vec<Result<Value>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let gate_seed = rng::derive_seed(cfg.seed, if cfg.fixed_instance { 0 } else { i as u64 });
            let inst = CircuitInstance::sample(layout.clone(), gate_seed);
            let mut eng = PatchEngine::new(&inst, DEFAULT_CAP_BITS);
            let mut m = rng::tagged(cfg.seed, rng::domain::MEASURE, i as u64);
            let x = patching::recovery_stitch(&mut eng, &plan, &mut m)?;
            let p = patching::patching_probability(&mut eng, &plan, &x)?;
            Ok(json!({
                "trial": i,
                "gate_seed": gate_seed,
                "l": plan.l,
                "regions": plan.regions.len(),
                "outcome": outcome_string(&x, layout.q),
                "stitched_probability": p,
            }))
        })
        .collect();
    out.into_iter().collect()
}

fn run_cmi_scan(cfg: &ExperimentConfig) -> Result<Vec<Value>> {
    let (rows, cols) = (cfg.rows.unwrap_or(4), cfg.cols.unwrap_or(10));
    let t = patching::cmi_decay_scan(rows, cols, cfg.q, &cfg.separations, cfg.trials, cfg.seed)?;
    t.rows.iter().map(|r| serde_json::to_value(r).map_err(Error::from)).collect()
}

fn run_couplings(cfg: &ExperimentConfig) -> Result<Vec<Value>> {
    let q = cfg.q as f64;
    Ok(match cfg.arch {
        Family::Brickwork | Family::ExtendedBrickwork => {
            let c = statmech::brickwork_couplings(q)?;
            vec![json!({"model": "brickwork", "q": q, "j_vert": c.j_vert, "j_horiz": c.j_horiz, "j_square_critical": statmech::j_square()})]
        }
        Family::Chr => {
            let c = statmech::weak_measurement_couplings(q)?;
            vec![json!({
                "model": "triangular",
                "q": q,
                "j1": c.j1,
                "j2": c.j2,
                "j3": c.j3,
                "criterion": statmech::triangular_criterion(&c),
                "q_c": statmech::triangular_critical_q()?,
            })]
        }
    })
}

fn run_z2(cfg: &ExperimentConfig) -> Result<Vec<Value>> {
    let rows = statmech::quasi_entropy_scan(cfg.q, &cfg.heights, cfg.measured_cols, cfg.open_cols, cfg.sweeps, cfg.seed)?;
    rows.iter().map(|r| serde_json::to_value(r).map_err(Error::from)).collect()
}

fn check(name: &str, instance: String, value: f64, tol: f64) -> Value {
    json!({"check": name, "instance": instance, "value": value, "tolerance": tol, "pass": value.is_finite() && value <= tol})
}

/// Oracle-equivalence suite on small built-in instances.
fn run_validate(cfg: &ExperimentConfig) -> Result<Vec<Value>> {
    let mut rows = Vec::new();
    let corpus: Vec<(&str, CircuitLayout)> = vec![
        ("brickwork 3x4 q2", brickwork_layout(3, 4, 2)?),
        ("brickwork 2x3 q3", brickwork_layout(2, 3, 3)?),
        ("chr 3x3", chr_layout(3)?),
        ("extended L2 r2 v1", extended_brickwork_layout(2, 2, 1, 2)?),
        ("extended L3 r2 v1", extended_brickwork_layout(3, 2, 1, 2)?),
    ];
    let seeds: Vec<u64> = (0..cfg.trials.max(2) as u64).map(|i| rng::derive_seed(cfg.seed, i)).collect();
    for (name, layout) in &corpus {
        for &s in &seeds {
            let inst = CircuitInstance::sample(layout.clone(), s);
            let exact = simulate_exact(&inst)?.probabilities();
            let d = sebd_distribution(&inst, &TruncationPolicy::exact())?;
            rows.push(check("sebd-exact-tv", format!("{name} seed {s}"), d.tv_to(&exact), 1e-8));
            let x = exact.outcome_of(exact.probs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |p| p.0));
            let lp = sebd_log_probability(&inst, &TruncationPolicy::exact(), &x)?.map_or(0.0, f64::exp);
            rows.push(check("sebd-probability", format!("{name} seed {s}"), (lp - exact.prob(&x)).abs(), 1e-10));
            if layout.q == 2 && layout.n_sites() <= 12 {
                let trunc = sebd_distribution(&inst, &TruncationPolicy::new(1e-3, None)?)?;
                let cert = distribution_certificate(&trunc);
                rows.push(check("certificate-slack", format!("{name} seed {s}"), trunc.tv_to(&exact) - cert.tv_bound, 1e-12));
            }
            let sites: Vec<Site> = layout.sites().into_iter().step_by(2).collect();
            let m = marginal_distribution(&inst, &sites, DEFAULT_CAP_BITS)?;
            let idx: Vec<usize> = sites.iter().map(|s| layout.site_index(*s)).collect();
            rows.push(check("lightcone-marginal-tv", format!("{name} seed {s}"), m.tv(&exact.marginal(&idx)), 1e-10));
            if *name == "chr 3x3" {
                let d3 = alg3_distribution(&bases_from_instance(&inst)?)?;
                rows.push(check("alg3-tv", format!("{name} seed {s}"), d3.tv(&exact), 1e-8));
            }
        }
    }
    let bw = brickwork_layout(2, 3, 2)?;
    let a = [Site::new(0, 2), Site::new(1, 2)];
    let bounds = statmech::boundaries(&bw, &a, &[], false);
    let z = statmech::partition_function_exact(&statmech::build_spin_model(&bw, &bounds)?)?;
    let zd = statmech::partition_function_exact(&statmech::build_decimated_model(&bw, &bounds)?)?;
    rows.push(check("decimation", "brickwork 2x3 q2".into(), ((z - zd) / z).abs(), 1e-10));
    let z0 = statmech::partition_function_exact(&statmech::build_decimated_model(&bw, &statmech::boundaries(&bw, &[], &[], false))?)?;
    rows.push(check("unitary-normalization", "brickwork 2x3 q2".into(), (z0 - 1.0).abs(), 1e-10));
    let wg = (statmech::weingarten_k2(statmech::E, 2), statmech::weingarten_k2(statmech::SWAP, 2));
    let exact_wg = wg == (num_rational::Ratio::new(1, 15), num_rational::Ratio::new(-1, 60));
    rows.push(json!({"check": "weingarten-q2", "instance": "q=2", "value": format!("{}, {}", wg.0, wg.1), "tolerance": 0.0, "pass": exact_wg}));
    Ok(rows)
}

/// Writes rows to `w`, JSON lines or CSV, with the version and config hash
/// as a header and the seed and hash in every row.
pub fn write_rows<W: Write>(cfg: &ExperimentConfig, rows: &[Value], mut w: W) -> Result<()> {
    let hash = cfg.hash();
    let stamp = |r: &Value| -> Map<String, Value> {
        let mut m = match r {
            Value::Object(m) => m.clone(),
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other.clone());
                m
            }
        };
        m.insert("seed".into(), json!(cfg.seed));
        m.insert("config_hash".into(), json!(hash));
        m
    };
    match cfg.format {
        Format::Jsonl => {
            let header = json!({"version": VERSION, "config_hash": hash, "config": cfg});
            writeln!(w, "{header}")?;
            for r in rows {
                writeln!(w, "{}", Value::Object(stamp(r)))?;
            }
        }
        Format::Csv => {
            writeln!(w, "# shallow2d {VERSION} config_hash={hash}")?;
            let stamped: Vec<Map<String, Value>> = rows.iter().map(stamp).collect();
            let mut keys: Vec<String> = Vec::new();
            let mut seen = BTreeMap::new();
            for m in &stamped {
                for k in m.keys() {
                    if seen.insert(k.clone(), ()).is_none() {
                        keys.push(k.clone());
                    }
                }
            }
            let mut wr = csv::Writer::from_writer(&mut w);
            wr.write_record(&keys)?;
            for m in &stamped {
                wr.write_record(keys.iter().map(|k| match m.get(k) {
                    None | Some(Value::Null) => String::new(),
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                }))?;
            }
            wr.flush()?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Json(_) => 2,
        Error::ResourceCap(_) => 3,
        _ => 1,
    }
}

/// Parses `args`, runs, writes output, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(w) = cli.workers {
        // Fails only when a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global();
    }
    let result = resolve(cli.config.as_deref(), cli.command).and_then(|cfg| {
        let report = execute(&cfg)?;
        match &cfg.output {
            Some(p) => write_rows(&cfg, &report.rows, std::io::BufWriter::new(std::fs::File::create(p)?))?,
            None => write_rows(&cfg, &report.rows, std::io::stdout().lock())?,
        }
        Ok(report.ok)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("validation failed");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
