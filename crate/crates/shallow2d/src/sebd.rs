//! Column-sweep simulation. The chain holds one site per lattice row; each
//! iteration compresses, pulls in the gates whose lightcone first reaches
//! the current column, checks the bond cutoff, and measures the column.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::architecture::{
    brickwork_layout, chr_layout, extended_brickwork_layout, lightcone_schedule, CircuitInstance, CircuitLayout, Family,
};
use crate::error::{Error, Result};
use crate::mps::{renyi_bits, MatrixProductState, TruncationLog, TruncationPolicy};
use crate::oracle::OutputDistribution;
use crate::rng;
use crate::stats;
use crate::tensor::swap_gate_factors;

/// Mid-sweep state. Columns `lo..hi` are held as physical factors of every
/// row site, column `lo` being factor 0.
#[derive(Clone)]
pub struct Sweep<'a> {
    instance: &'a CircuitInstance,
    by_iteration: std::sync::Arc<Vec<Vec<usize>>>,
    pub mps: MatrixProductState,
    pub log: TruncationLog,
    policy: TruncationPolicy,
    lo: usize,
    hi: usize,
}

impl<'a> Sweep<'a> {
    pub fn new(instance: &'a CircuitInstance, policy: TruncationPolicy) -> Result<Self> {
        let layout = &instance.layout;
        let sched = lightcone_schedule(layout);
        let mut by_iteration = vec![Vec::new(); layout.cols];
        for (g, &t) in sched.iter().enumerate() {
            by_iteration[t].push(g);
        }
        let mps = MatrixProductState::product_state(&vec![layout.q; layout.rows], &vec![0; layout.rows])?;
        Ok(Self {
            instance,
            by_iteration: std::sync::Arc::new(by_iteration),
            mps,
            log: TruncationLog::new(),
            policy,
            lo: 0,
            hi: 1,
        })
    }

    fn layout(&self) -> &CircuitLayout {
        &self.instance.layout
    }

    /// Compress (from the second iteration on), absorb the qudits and apply
    /// the gates newly inside the lightcone of column `t`, then check the
    /// cutoff. Returns `false` on FAIL.
    pub fn prepare(&mut self, t: usize) -> Result<bool> {
        debug_assert_eq!(t, self.lo);
        if t > 0 {
            self.mps.compress(&self.policy, t, &mut self.log)?;
        }
        let layout = &self.instance.layout;
        let gates = self.by_iteration.clone();
        let need = gates[t].iter().map(|&g| layout.events[g].max_col()).max().unwrap_or(t).max(t) + 1;
        while self.hi < need {
            self.hi += 1;
            for row in 0..layout.rows {
                self.mps.absorb_site(row, layout.q)?;
            }
        }
        for &g in &gates[t] {
            self.apply_gate(g)?;
        }
        Ok(!self.policy.exceeds(self.mps.max_bond()))
    }

    fn apply_gate(&mut self, g: usize) -> Result<()> {
        let ev = &self.instance.layout.events[g];
        let u = &self.instance.gates[g];
        let q = self.layout().q;
        let lo = self.lo;
        match ev.sites.as_slice() {
            [s] => self.mps.apply_local(s.row, &[s.col - lo], u),
            [a, b] if a.row == b.row => self.mps.apply_local(a.row, &[a.col - lo, b.col - lo], u),
            [a, b] => {
                if a.row < b.row {
                    self.mps.apply_two_site_factors(a.row, a.col - lo, b.col - lo, u)
                } else {
                    let swapped = swap_gate_factors(u, q, q)?;
                    self.mps.apply_two_site_factors(b.row, b.col - lo, a.col - lo, &swapped)
                }
            }
            _ => Err(Error::Unsupported("gates act on one or two sites".into())),
        }
    }

    /// Conditions the current column's qudit in `row` on `outcome`.
    pub fn condition(&mut self, row: usize, outcome: usize) -> Result<f64> {
        self.mps.project_factor(row, 0, outcome)
    }

    pub fn outcome_probabilities(&mut self, row: usize) -> Result<Vec<f64>> {
        self.mps.factor_probabilities(row, 0)
    }

    pub fn measure<R: Rng + ?Sized>(&mut self, row: usize, rng: &mut R) -> Result<(usize, f64)> {
        self.mps.measure_factor(row, 0, rng)
    }

    /// Call once every row of the current column has been conditioned.
    pub fn finish_column(&mut self) {
        self.lo += 1;
    }

    /// Schmidt values at `cut` of the current chain state.
    pub fn spectrum(&mut self, cut: usize) -> Result<Vec<f64>> {
        self.mps.schmidt_spectrum(cut)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumRecord {
    /// 0-based column just measured.
    pub iteration: usize,
    pub cut: usize,
    pub schmidt: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SebdSample {
    /// Row-major outcome string, `None` on FAIL.
    pub outcome: Option<Vec<usize>>,
    pub log: TruncationLog,
    pub records: Vec<SpectrumRecord>,
    pub seed: u64,
    pub max_bond: usize,
}

impl SebdSample {
    pub fn failed(&self) -> bool {
        self.outcome.is_none()
    }
}

/// Where and how often to record Schmidt spectra during a sample.
#[derive(Clone, Copy, Debug)]
pub struct RecordSpec {
    pub cut: usize,
    pub stride: usize,
}

pub fn sebd_sample<R: Rng + ?Sized>(instance: &CircuitInstance, policy: &TruncationPolicy, rng: &mut R) -> Result<SebdSample> {
    sebd_sample_recorded(instance, policy, rng, None)
}

pub fn sebd_sample_recorded<R: Rng + ?Sized>(
    instance: &CircuitInstance,
    policy: &TruncationPolicy,
    rng: &mut R,
    record: Option<RecordSpec>,
) -> Result<SebdSample> {
    let layout = &instance.layout;
    let mut sweep = Sweep::new(instance, *policy)?;
    let mut x = vec![0usize; layout.n_sites()];
    let mut records = Vec::new();
    let mut max_bond = 1;
    for t in 0..layout.cols {
        let ok = sweep.prepare(t)?;
        max_bond = max_bond.max(sweep.mps.max_bond());
        if !ok {
            return Ok(SebdSample { outcome: None, log: sweep.log, records, seed: instance.seed, max_bond });
        }
        for row in 0..layout.rows {
            let (o, _) = sweep.measure(row, rng)?;
            x[row * layout.cols + t] = o;
        }
        sweep.finish_column();
        if let Some(spec) = record {
            if spec.cut + 1 < layout.rows && t % spec.stride.max(1) == 0 {
                records.push(SpectrumRecord { iteration: t, cut: spec.cut, schmidt: sweep.spectrum(spec.cut)? });
            }
        }
    }
    Ok(SebdSample { outcome: Some(x), log: sweep.log, records, seed: instance.seed, max_bond })
}

/// `ln D'(x)`, or `None` when the estimate is exactly zero (a zero
/// conditional probability or a FAIL).
pub fn sebd_log_probability(instance: &CircuitInstance, policy: &TruncationPolicy, x: &[usize]) -> Result<Option<f64>> {
    let layout = &instance.layout;
    if x.len() != layout.n_sites() {
        return Err(Error::InvalidArgument(format!("outcome of length {} for {} sites", x.len(), layout.n_sites())));
    }
    if let Some(&bad) = x.iter().find(|&&v| v >= layout.q) {
        return Err(Error::InvalidArgument(format!("outcome digit {bad} >= q")));
    }
    let mut sweep = Sweep::new(instance, *policy)?;
    let mut acc = 0.0;
    for t in 0..layout.cols {
        if !sweep.prepare(t)? {
            return Ok(None);
        }
        for row in 0..layout.rows {
            let p = sweep.condition(row, x[row * layout.cols + t])?;
            if p <= 0.0 {
                return Ok(None);
            }
            acc += p.ln();
        }
        sweep.finish_column();
    }
    Ok(Some(acc))
}

pub fn sebd_probability(instance: &CircuitInstance, policy: &TruncationPolicy, x: &[usize]) -> Result<f64> {
    Ok(sebd_log_probability(instance, policy, x)?.map_or(0.0, f64::exp))
}

/// Exact law of the sampler, by branching over every measurement outcome.
#[derive(Clone, Debug)]
pub struct SebdDistribution {
    /// `D'(x)` for every non-FAIL string.
    pub dist: OutputDistribution,
    pub fail_mass: f64,
    /// `E sum_i sqrt(2 eps_i)` over the sampler's randomness, FAIL runs included.
    pub expected_sqrt_sum: f64,
    /// `E Lambda`.
    pub expected_lambda: f64,
}

impl SebdDistribution {
    /// Total variation to a reference distribution, counting FAIL mass as
    /// disagreement.
    pub fn tv_to(&self, reference: &OutputDistribution) -> f64 {
        self.dist.tv(reference) + 0.5 * self.fail_mass
    }
}

/// Enumeration guard for [`sebd_distribution`]: `n log2 q <= 16`.
pub const DISTRIBUTION_CAP_BITS: f64 = 16.0;

pub fn sebd_distribution(instance: &CircuitInstance, policy: &TruncationPolicy) -> Result<SebdDistribution> {
    let layout = &instance.layout;
    crate::oracle::check_cap(layout.n_sites(), layout.q, DISTRIBUTION_CAP_BITS)?;
    let mut out = SebdDistribution {
        dist: OutputDistribution::new(layout.n_sites(), layout.q, vec![0.0; layout.q.pow(layout.n_sites() as u32)])?,
        fail_mass: 0.0,
        expected_sqrt_sum: 0.0,
        expected_lambda: 0.0,
    };
    let mut x = vec![0usize; layout.n_sites()];
    let sweep = Sweep::new(instance, *policy)?;
    branch(sweep, 0, 0, 1.0, &mut x, &mut out)?;
    Ok(out)
}

fn branch(mut sweep: Sweep<'_>, t: usize, row: usize, mass: f64, x: &mut [usize], out: &mut SebdDistribution) -> Result<()> {
    let (rows, cols) = (sweep.layout().rows, sweep.layout().cols);
    if t == cols {
        let idx = out.dist.index_of(x);
        out.dist.probs[idx] += mass;
        out.expected_sqrt_sum += mass * sweep.log.sqrt_sum();
        out.expected_lambda += mass * sweep.log.lambda();
        return Ok(());
    }
    if row == 0 && !sweep.prepare(t)? {
        out.fail_mass += mass;
        out.expected_sqrt_sum += mass * sweep.log.sqrt_sum();
        out.expected_lambda += mass * sweep.log.lambda();
        return Ok(());
    }
    let probs = sweep.outcome_probabilities(row)?;
    for (o, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let mut next = sweep.clone();
        next.condition(row, o)?;
        x[row * cols + t] = o;
        if row + 1 == rows {
            next.finish_column();
            branch(next, t + 1, 0, mass * p, x, out)?;
        } else {
            branch(next, t, row + 1, mass * p, x, out)?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorCertificate {
    /// `sqrt_term + failure_term`.
    pub tv_bound: f64,
    /// `sum_i sqrt(2 eps_i)`, realized or averaged.
    pub sqrt_term: f64,
    pub failure_term: f64,
    /// `sqrt(2) Lambda + failure_term`.
    pub lambda_bound: f64,
    /// Confidence level when `failure_term` is an interval bound from trials.
    pub confidence: Option<f64>,
}

pub fn error_certificate(log: &TruncationLog, p_fail: f64) -> ErrorCertificate {
    ErrorCertificate {
        tv_bound: log.sqrt_sum() + p_fail,
        sqrt_term: log.sqrt_sum(),
        failure_term: p_fail,
        lambda_bound: std::f64::consts::SQRT_2 * log.lambda() + p_fail,
        confidence: None,
    }
}

/// Certificate from an exactly enumerated sampler law.
pub fn distribution_certificate(d: &SebdDistribution) -> ErrorCertificate {
    ErrorCertificate {
        tv_bound: d.expected_sqrt_sum + d.fail_mass,
        sqrt_term: d.expected_sqrt_sum,
        failure_term: d.fail_mass,
        lambda_bound: std::f64::consts::SQRT_2 * d.expected_lambda + d.fail_mass,
        confidence: None,
    }
}

/// Certificate from repeated samples: the mean realized `sum_i sqrt(2 eps_i)`
/// plus the Clopper-Pearson upper bound on the FAIL probability.
pub fn trial_certificate(samples: &[SebdSample], confidence: f64) -> Result<ErrorCertificate> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let sq: Vec<f64> = samples.iter().map(|s| s.log.sqrt_sum()).collect();
    let la: Vec<f64> = samples.iter().map(|s| s.log.lambda()).collect();
    let fails = samples.iter().filter(|s| s.failed()).count() as u64;
    let (_, hi) = failure_confidence_interval(samples.len() as u64, fails, confidence)?;
    let sqrt_term = stats::mean(&sq);
    Ok(ErrorCertificate {
        tv_bound: sqrt_term + hi,
        sqrt_term,
        failure_term: hi,
        lambda_bound: std::f64::consts::SQRT_2 * stats::mean(&la) + hi,
        confidence: Some(confidence),
    })
}

/// Worst-case bound `L2 sqrt(2 eps L1) + p_f` from the policy alone.
pub fn uniform_bound(policy: &TruncationPolicy, rows: usize, cols: usize, p_fail: f64) -> f64 {
    cols as f64 * (2.0 * policy.eps * rows as f64).sqrt() + p_fail
}

pub fn failure_confidence_interval(trials: u64, failures: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || failures > trials || !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!("{failures} failures in {trials} trials at confidence {confidence}")));
    }
    Ok(stats::clopper_pearson(trials, failures, confidence))
}

/// Parameters of an entanglement scan.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct ScanSpec {
    pub family: Family,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub policy: TruncationPolicy,
    pub seed: u64,
    pub q: usize,
    /// Extended brickwork only.
    pub r: usize,
    pub v: usize,
    /// Number of final iterations averaged per instance (the last one,
    /// where the chain is empty, is never included).
    pub window: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRecord {
    pub size: usize,
    pub instance: usize,
    pub iteration: usize,
    pub s_half: f64,
    pub s1: f64,
    pub s2: f64,
    pub schmidt: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanSummary {
    pub size: usize,
    pub n_instances: usize,
    pub failures: usize,
    pub mean_s_half: f64,
    pub mean_s1: f64,
    pub stderr_s1: f64,
    pub mean_s2: f64,
}

pub fn family_layout(family: Family, size: usize, q: usize, r: usize, v: usize) -> Result<CircuitLayout> {
    match family {
        Family::Brickwork => brickwork_layout(size, size, q),
        Family::ExtendedBrickwork => extended_brickwork_layout(size, r, v, q),
        Family::Chr => chr_layout(size),
    }
}

/// Half-chain Rényi entropies (bits) along SEBD sweeps. Instance `i` of size
/// `L` uses gate seed `derive_seed(seed, L * 1_000_003 + i)`.
pub fn entanglement_scan(spec: &ScanSpec) -> Result<(Vec<ScanRecord>, Vec<ScanSummary>)> {
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &size in &spec.sizes {
        let layout = family_layout(spec.family, size, spec.q, spec.r, spec.v)?;
        if layout.rows < 2 {
            return Err(Error::InvalidArgument("entanglement scan needs at least two rows".into()));
        }
        let cut = layout.rows / 2 - 1;
        let runs: Vec<Result<(Vec<ScanRecord>, bool)>> = (0..spec.trials)
            .into_par_iter()
            .map(|i| {
                let gate_seed = rng::derive_seed(spec.seed, (size as u64) * 1_000_003 + i as u64);
                let inst = CircuitInstance::sample(layout.clone(), gate_seed);
                let mut mrng = rng::tagged(gate_seed, rng::domain::MEASURE, 0);
                let s = sebd_sample_recorded(&inst, &spec.policy, &mut mrng, Some(RecordSpec { cut, stride: 1 }))?;
                let recs = s
                    .records
                    .iter()
                    .map(|r| ScanRecord {
                        size,
                        instance: i,
                        iteration: r.iteration,
                        s_half: renyi_bits(&r.schmidt, 0.5),
                        s1: renyi_bits(&r.schmidt, 1.0),
                        s2: renyi_bits(&r.schmidt, 2.0),
                        schmidt: r.schmidt.clone(),
                    })
                    .collect();
                Ok((recs, s.failed()))
            })
            .collect();
        let (mut s_half, mut s1, mut s2) = (vec![], vec![], vec![]);
        let mut failures = 0;
        for run in runs {
            let (recs, failed) = run?;
            if failed {
                failures += 1;
            }
            let last = layout.cols - 1;
            let tail: Vec<&ScanRecord> = recs.iter().filter(|r| r.iteration < last && r.iteration + spec.window >= last).collect();
            if !failed && !tail.is_empty() {
                let m = |f: fn(&ScanRecord) -> f64| tail.iter().map(|r| f(r)).sum::<f64>() / tail.len() as f64;
                s_half.push(m(|r| r.s_half));
                s1.push(m(|r| r.s1));
                s2.push(m(|r| r.s2));
            }
            records.extend(recs);
        }
        summaries.push(ScanSummary {
            size,
            n_instances: s1.len(),
            failures,
            mean_s_half: stats::mean(&s_half),
            mean_s1: stats::mean(&s1),
            stderr_s1: stats::std_err(&s1),
            mean_s2: stats::mean(&s2),
        });
    }
    Ok((records, summaries))
}
