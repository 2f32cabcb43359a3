//! Effective 1D dynamics of the cluster-state model (fixed and randomized
//! weak measurements on a qubit chain), the toy model of pairs, and the
//! spectrum analyses built on it.
//!
//! Basis states are `|theta, phi> = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`
//! with orthogonal partner `sin(theta/2)|0> - e^{i phi} cos(theta/2)|1>`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::architecture::{one_d_brickwork_layout, CircuitInstance, GateKind};
use crate::error::{Error, Result};
use crate::mps::sample_index;
use crate::oracle::{reduced_density, simulate_exact, von_neumann_bits, OutputDistribution, Statevector};
use crate::rng;
use crate::stats::{self, LinearFit};
use crate::tensor::{apply_local, ComplexTensor, C64, ONE, ZERO};

fn diag(a: C64, b: C64) -> ComplexTensor {
    ComplexTensor::matrix(2, 2, vec![a, ZERO, ZERO, b]).expect("2x2")
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn hadamard() -> ComplexTensor {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexTensor::matrix(2, 2, vec![re(s), re(s), re(s), re(-s)]).expect("2x2")
}

pub fn basis_ket(theta: f64, phi: f64) -> [C64; 2] {
    [re((theta / 2.0).cos()), C64::from_polar((theta / 2.0).sin(), phi)]
}

pub fn basis_perp(theta: f64, phi: f64) -> [C64; 2] {
    [re((theta / 2.0).sin()), -C64::from_polar((theta / 2.0).cos(), phi)]
}

/// Weak measurement operators of the cluster-state dynamics. `m0` is what a
/// neighbour experiences when a qubit is projected on `|theta, phi>`, `m1`
/// when it is projected on the orthogonal partner.
pub fn chr_m0(theta: f64, phi: f64) -> ComplexTensor {
    diag(re((theta / 2.0).cos()), C64::from_polar((theta / 2.0).sin(), -phi))
}

pub fn chr_m1(theta: f64, phi: f64) -> ComplexTensor {
    diag(re((theta / 2.0).sin()), -C64::from_polar((theta / 2.0).cos(), -phi))
}

/// `N(x) = diag(sqrt((1+x)/2), sqrt((1-x)/2))`; `{N(x), N(-x)}` is a weak
/// measurement for `x` in `[-1, 1]`.
pub fn n_op(x: f64) -> ComplexTensor {
    diag(re(((1.0 + x) / 2.0).max(0.0).sqrt()), re(((1.0 - x) / 2.0).max(0.0).sqrt()))
}

pub fn phase_op(phi: f64) -> ComplexTensor {
    diag(ONE, C64::from_polar(1.0, phi))
}

/// Toy-model measurement with phases dropped.
pub fn toy_m0(theta: f64) -> ComplexTensor {
    diag(re((theta / 2.0).cos()), re((theta / 2.0).sin()))
}

pub fn toy_m1(theta: f64) -> ComplexTensor {
    diag(re((theta / 2.0).sin()), re((theta / 2.0).cos()))
}

/// `max |sum_k M_k^dag M_k - I|`.
pub fn completeness_defect(ops: &[ComplexTensor]) -> f64 {
    let mut acc = ComplexTensor::zeros(vec![2, 2]);
    for m in ops {
        let p = m.adjoint().expect("matrix").matmul(m).expect("square");
        for (a, b) in acc.data_mut().iter_mut().zip(p.data()) {
            *a += b;
        }
    }
    acc.max_abs_diff(&ComplexTensor::identity(2))
}

/// `(theta, phi)` of the basis a Haar gate `U` followed by a computational
/// measurement projects on for outcome 0, i.e. of `U^dag e_0`.
pub fn basis_from_unitary(u: &ComplexTensor) -> (f64, f64) {
    let v0 = u.get(&[0, 0]).conj();
    let v1 = u.get(&[0, 1]).conj();
    let theta = 2.0 * v0.norm().clamp(0.0, 1.0).acos();
    let phi = if v0.norm() > 0.0 && v1.norm() > 0.0 { v1.arg() - v0.arg() } else { 0.0 };
    (theta, phi)
}

/// Measurement bases of a cluster-state instance, indexed `[row][col]`.
pub fn bases_from_instance(instance: &CircuitInstance) -> Result<Vec<Vec<(f64, f64)>>> {
    let l = &instance.layout;
    let mut out = vec![vec![(0.0, 0.0); l.cols]; l.rows];
    let mut seen = 0;
    for (ev, g) in l.events.iter().zip(&instance.gates) {
        if ev.kind == GateKind::HaarOneSite {
            let s = ev.sites[0];
            out[s.row][s.col] = basis_from_unitary(g);
            seen += 1;
        }
    }
    if seen != l.n_sites() || l.q != 2 {
        return Err(Error::InvalidArgument("not a cluster-state instance".into()));
    }
    Ok(out)
}

/// Uniform superposition on a chain of `n` qubits.
pub fn plus_chain(n: usize) -> Statevector {
    let a = re((0.5f64).powf(n as f64 / 2.0));
    Statevector { n_sites: n, local_dim: 2, amplitudes: vec![a; 1 << n] }
}

pub fn cz_chain(state: &mut Statevector) {
    let n = state.n_sites;
    for (idx, a) in state.amplitudes.iter_mut().enumerate() {
        let pairs = (0..n.saturating_sub(1)).filter(|&i| (idx >> (n - 1 - i)) & 1 == 1 && (idx >> (n - 2 - i)) & 1 == 1).count();
        if pairs % 2 == 1 {
            *a = -*a;
        }
    }
}

fn apply_1q(state: &mut Statevector, site: usize, op: &ComplexTensor) {
    let dims = vec![2; state.n_sites];
    apply_local(&mut state.amplitudes, &dims, &[site], op.data());
}

/// Applies `op_o` to `site` with probability `||op_o psi||^2`, renormalizes,
/// and returns the outcome.
fn weak_measure<R: Rng + ?Sized>(state: &mut Statevector, site: usize, ops: &[ComplexTensor], rng: &mut R) -> Result<usize> {
    let branches: Vec<Statevector> = ops
        .iter()
        .map(|m| {
            let mut s = state.clone();
            apply_1q(&mut s, site, m);
            s
        })
        .collect();
    let p: Vec<f64> = branches.iter().map(|b| b.norm_sqr()).collect();
    let o = sample_index(&p, rng);
    *state = branches.into_iter().nth(o).expect("branch");
    state.normalize()?;
    Ok(o)
}

/// One step of the fixed-basis dynamics: CZ on every adjacent pair, the
/// weak measurement `{M0, M1}` on each site, Hadamard on every site.
pub fn chr_effective_step_fixed<R: Rng + ?Sized>(state: &mut Statevector, bases: &[(f64, f64)], rng: &mut R) -> Result<Vec<usize>> {
    if bases.len() != state.n_sites {
        return Err(Error::InvalidArgument(format!("{} bases for {} qubits", bases.len(), state.n_sites)));
    }
    cz_chain(state);
    let h = hadamard();
    let mut out = Vec::with_capacity(bases.len());
    for (i, &(th, ph)) in bases.iter().enumerate() {
        out.push(weak_measure(state, i, &[chr_m0(th, ph), chr_m1(th, ph)], rng)?);
        apply_1q(state, i, &h);
    }
    Ok(out)
}

/// One step of the randomized dynamics: CZ layer, then per site
/// `{N(x), N(-x)}` with `x` uniform on `[-1, 1]`, a phase gate with uniform
/// angle, and a Hadamard.
pub fn chr_effective_step_random<R: Rng + ?Sized>(state: &mut Statevector, rng: &mut R) -> Result<Vec<usize>> {
    cz_chain(state);
    let h = hadamard();
    let mut out = Vec::with_capacity(state.n_sites);
    for i in 0..state.n_sites {
        let x: f64 = rng.random_range(-1.0..=1.0);
        out.push(weak_measure(state, i, &[n_op(x), n_op(-x)], rng)?);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        apply_1q(state, i, &phase_op(phi));
        apply_1q(state, i, &h);
    }
    Ok(out)
}

/// Haar-random basis angles: `cos(theta)` uniform on `[-1, 1]`, `phi` uniform.
pub fn haar_basis<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let x: f64 = rng.random_range(-1.0..=1.0);
    (x.acos(), rng.random_range(0.0..2.0 * PI))
}

/// Joint outcome law of the fixed-basis dynamics on a `rows x cols` grid of
/// bases (`[row][col]`): `cols - 1` steps, then a final CZ layer and a
/// projective measurement of the chain in the last column's bases. Outcomes
/// are listed row-major like the lattice.
pub fn alg3_distribution(bases: &[Vec<(f64, f64)>]) -> Result<OutputDistribution> {
    let rows = bases.len();
    let cols = bases.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 || rows * cols > 20 {
        return Err(Error::InvalidArgument(format!("{rows}x{cols} grid outside enumeration range")));
    }
    let mut dist = OutputDistribution::new(rows * cols, 2, vec![0.0; 1 << (rows * cols)])?;
    let mut x = vec![0usize; rows * cols];
    alg3_branch(bases, plus_chain(rows), 0, 0, 1.0, &mut x, &mut dist)?;
    Ok(dist)
}

fn alg3_branch(
    bases: &[Vec<(f64, f64)>],
    mut state: Statevector,
    t: usize,
    row: usize,
    mass: f64,
    x: &mut [usize],
    dist: &mut OutputDistribution,
) -> Result<()> {
    let rows = bases.len();
    let cols = bases[0].len();
    if row == 0 {
        cz_chain(&mut state);
    }
    let (th, ph) = bases[row][t];
    let last = t + 1 == cols;
    let ops: [ComplexTensor; 2] = if last {
        let k = basis_ket(th, ph);
        let p = basis_perp(th, ph);
        [
            ComplexTensor::matrix(2, 2, vec![k[0].conj(), k[1].conj(), ZERO, ZERO])?,
            ComplexTensor::matrix(2, 2, vec![p[0].conj(), p[1].conj(), ZERO, ZERO])?,
        ]
    } else {
        [chr_m0(th, ph), chr_m1(th, ph)]
    };
    for (o, m) in ops.iter().enumerate() {
        let mut s = state.clone();
        apply_1q(&mut s, row, m);
        let p = s.norm_sqr();
        if p <= 1e-300 {
            continue;
        }
        s.normalize()?;
        if !last {
            apply_1q(&mut s, row, &hadamard());
        }
        x[row * cols + t] = o;
        let m = mass * p;
        if row + 1 < rows {
            alg3_branch(bases, s, t, row + 1, m, x, dist)?;
        } else if last {
            let idx = dist.index_of(x);
            dist.probs[idx] += m;
        } else {
            alg3_branch(bases, s, t + 1, 0, m, x, dist)?;
        }
    }
    Ok(())
}

/// Von Neumann entropy (bits) of the first `cut` qubits of a chain.
pub fn chain_entropy(state: &Statevector, cut: usize) -> Result<f64> {
    let region: Vec<usize> = (0..cut).collect();
    von_neumann_bits(&reduced_density(state, &region)?)
}

/// Pair-product representation of the toy model. Pair `k` is
/// `|00> + c_k |11>` (unnormalized) straddling the central cut; `ln c_k` is
/// tracked, with `+-inf` for pairs collapsed to a product state.
#[derive(Clone, Debug, Serialize)]
pub struct ToyState {
    /// Oldest first.
    pub log_c: Vec<f64>,
}

impl ToyState {
    /// Schmidt eigenvalue pair `(big, small)` of each pair.
    pub fn pair_spectra(&self) -> Vec<(f64, f64)> {
        self.log_c
            .iter()
            .map(|&lc| {
                let a = lc.abs();
                if a.is_infinite() {
                    (1.0, 0.0)
                } else {
                    let e = (-2.0 * a).exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                }
            })
            .collect()
    }

    pub fn half_chain_entropy(&self) -> f64 {
        self.pair_spectra().iter().map(|&(b, s)| crate::oracle::shannon_bits([b, s])).sum()
    }

    /// The `k` largest half-chain Schmidt eigenvalues, non-increasing.
    pub fn top_spectrum(&self, k: usize) -> Vec<f64> {
        top_product_spectrum(&self.pair_spectra(), k, 0.0)
    }

    /// Largest eigenvalues until their sum reaches `1 - tail` or `k_max` are listed.
    pub fn spectrum_to_tail(&self, tail: f64, k_max: usize) -> Vec<f64> {
        top_product_spectrum(&self.pair_spectra(), k_max, tail)
    }
}

/// Largest entries of the spectrum of a tensor product of two-level
/// spectra `(big, small)`, by best-first enumeration of subset sums of
/// `ln(big/small)`. Stops after `k` values or once the listed mass reaches
/// `1 - tail` (when `tail > 0`).
pub fn top_product_spectrum(pairs: &[(f64, f64)], k: usize, tail: f64) -> Vec<f64> {
    let log_top: f64 = pairs.iter().map(|p| p.0.ln()).sum();
    let mut gaps: Vec<f64> = pairs.iter().filter(|p| p.1 > 0.0).map(|p| (p.0 / p.1).ln()).collect();
    gaps.sort_by(|a, b| a.total_cmp(b));
    let mut out = Vec::new();
    let mut mass = 0.0;
    let mut push = |s: f64, out: &mut Vec<f64>| -> bool {
        let v = (log_top - s).exp();
        out.push(v);
        mass += v;
        out.len() >= k || (tail > 0.0 && mass >= 1.0 - tail)
    };
    if k == 0 || push(0.0, &mut out) {
        return out;
    }
    // Heap of (sum, index of the largest element in the subset).
    let mut heap: BinaryHeap<Reverse<(OrdF64, usize)>> = BinaryHeap::new();
    if let Some(&g) = gaps.first() {
        heap.push(Reverse((OrdF64(g), 0)));
    }
    while let Some(Reverse((OrdF64(s), j))) = heap.pop() {
        if push(s, &mut out) {
            break;
        }
        if j + 1 < gaps.len() {
            heap.push(Reverse((OrdF64(s + gaps[j + 1]), j + 1)));
            heap.push(Reverse((OrdF64(s - gaps[j] + gaps[j + 1]), j + 1)));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Probability of outcome 0 when one qubit of `|00> + c|11>` is measured
/// with `{M0(theta), M1(theta)}`.
pub fn toy_outcome0_probability(log_c: f64, theta: f64) -> f64 {
    let (c2, s2) = ((theta / 2.0).cos().powi(2), (theta / 2.0).sin().powi(2));
    if log_c > 0.0 {
        let e = (-2.0 * log_c).exp();
        (c2 * e + s2) / (e + 1.0)
    } else {
        let e = (2.0 * log_c).exp();
        (c2 + e * s2) / (1.0 + e)
    }
}

fn toy_measure<R: Rng + ?Sized>(log_c: &mut f64, theta: f64, lt: f64, rng: &mut R) -> u8 {
    let p0 = toy_outcome0_probability(*log_c, theta);
    if rng.random::<f64>() < p0 {
        *log_c += lt;
        0
    } else {
        *log_c -= lt;
        1
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DynamicsTrace {
    pub n: usize,
    pub theta: f64,
    /// Half-chain entropy (bits) after each step.
    pub entropies: Vec<f64>,
    /// Measurement outcomes per step, two per pair, oldest pair first.
    pub outcomes: Vec<Vec<u8>>,
    /// Top of the half-chain spectrum after each recorded step.
    pub spectra: Vec<(usize, Vec<f64>)>,
    pub final_state: ToyState,
}

/// Toy model on `n` qubits: each step resets the central pair to an EPR
/// pair, shifts each half outward cyclically (the oldest pair wraps to the
/// centre and is replaced), and weakly measures every qubit. Records the
/// top `spectrum_len` eigenvalues every `record_stride` steps (0: last step only).
pub fn toy_model_run<R: Rng + ?Sized>(
    n: usize,
    theta: f64,
    steps: usize,
    spectrum_len: usize,
    record_stride: usize,
    rng: &mut R,
) -> Result<DynamicsTrace> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::InvalidArgument(format!("toy model needs an even chain length, got {n}")));
    }
    let pairs = n / 2;
    let lt = (theta / 2.0).tan().ln();
    let mut st = ToyState { log_c: Vec::with_capacity(pairs) };
    let mut trace = DynamicsTrace { n, theta, entropies: vec![], outcomes: vec![], spectra: vec![], final_state: st.clone() };
    for step in 0..steps {
        if st.log_c.len() == pairs {
            st.log_c.remove(0);
        }
        st.log_c.push(0.0);
        let mut outs = Vec::with_capacity(2 * st.log_c.len());
        for lc in st.log_c.iter_mut() {
            outs.push(toy_measure(lc, theta, lt, rng));
            outs.push(toy_measure(lc, theta, lt, rng));
        }
        trace.outcomes.push(outs);
        trace.entropies.push(st.half_chain_entropy());
        let rec = if record_stride == 0 { step + 1 == steps } else { step % record_stride == 0 || step + 1 == steps };
        if rec && spectrum_len > 0 {
            trace.spectra.push((step, st.top_spectrum(spectrum_len)));
        }
    }
    trace.final_state = st;
    Ok(trace)
}

/// Number of outcome-1 results in `measurements` weak measurements of one
/// qubit pair that starts maximally entangled.
pub fn toy_pair_m1_count<R: Rng + ?Sized>(theta: f64, measurements: usize, rng: &mut R) -> usize {
    let lt = (theta / 2.0).tan().ln();
    let mut lc = 0.0;
    (0..measurements).filter(|_| toy_measure(&mut lc, theta, lt, rng) == 1).count()
}

/// Law of the count above: an even mixture of `Bin(m, sin^2(theta/2))` and
/// `Bin(m, cos^2(theta/2))`.
pub fn toy_pair_m1_law(theta: f64, measurements: usize) -> Vec<f64> {
    let s = (theta / 2.0).sin().powi(2);
    let m = measurements as u64;
    (0..=m)
        .map(|k| {
            let b = |p: f64| statrs::distribution::Discrete::pmf(&statrs::distribution::Binomial::new(p, m).expect("binomial"), k);
            0.5 * (b(s) + b(1.0 - s))
        })
        .collect()
}

/// `ceil(exp(sqrt(ln n)))`.
pub fn default_i_star(n: usize) -> usize {
    ((n as f64).ln().max(0.0).sqrt().exp()).ceil() as usize
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectrumFit {
    /// `ln lambda_i` against `ln^2 i`.
    pub log_squared: LinearFit,
    /// `ln lambda_i` against `ln i`, for comparison.
    pub power_law: LinearFit,
}

/// Least squares of `ln lambda_i` on `ln^2 i` over 1-based indices
/// `i >= i_min` with `lambda_i` above `1e-300`.
pub fn spectrum_fit(spectrum: &[f64], i_min: usize) -> Result<SpectrumFit> {
    if i_min < 2 {
        return Err(Error::InvalidArgument("i_min must be at least 2".into()));
    }
    let (mut x2, mut x1, mut y) = (vec![], vec![], vec![]);
    for (k, &l) in spectrum.iter().enumerate() {
        let i = k + 1;
        if i >= i_min && l > 1e-300 {
            let li = (i as f64).ln();
            x2.push(li * li);
            x1.push(li);
            y.push(l.ln());
        }
    }
    if y.len() < 5 {
        return Err(Error::InvalidArgument(format!("only {} spectrum points above the floor", y.len())));
    }
    Ok(SpectrumFit { log_squared: stats::linear_fit(&x2, &y), power_law: stats::linear_fit(&x1, &y) })
}

/// Smallest `r` with `sum_{i > r} lambda_i <= eps`, given the leading
/// eigenvalues (the unlisted remainder counts towards the tail).
pub fn minimal_rank(spectrum: &[f64], eps: f64) -> usize {
    let total: f64 = 1.0;
    let mut kept = 0.0;
    for (k, &l) in spectrum.iter().enumerate() {
        if total - kept <= eps {
            return k.max(1);
        }
        kept += l;
    }
    if total - kept <= eps {
        spectrum.len().max(1)
    } else {
        spectrum.len() + 1
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TradeoffRow {
    pub eps: f64,
    pub delta: f64,
    pub rank: usize,
}

/// For each `eps`, the `(1 - delta)`-quantile over states of the minimal
/// rank with squared discard at most `eps`.
pub fn rank_epsilon_tradeoff(states: &[ToyState], eps_grid: &[f64], delta: f64, k_max: usize) -> Vec<TradeoffRow> {
    let min_eps = eps_grid.iter().copied().fold(f64::INFINITY, f64::min).max(1e-15);
    let spectra: Vec<Vec<f64>> = states.par_iter().map(|s| s.spectrum_to_tail(min_eps * 0.5, k_max)).collect();
    eps_grid
        .iter()
        .map(|&eps| {
            let mut ranks: Vec<usize> = spectra.iter().map(|sp| minimal_rank(sp, eps)).collect();
            ranks.sort_unstable();
            let idx = (((1.0 - delta) * ranks.len() as f64).ceil() as usize).clamp(1, ranks.len()) - 1;
            TradeoffRow { eps, delta, rank: ranks[idx] }
        })
        .collect()
}

/// Trace rows `step, cut, index, lambda` for CSV export (index 1-based).
pub fn trace_rows(trace: &DynamicsTrace) -> Vec<(usize, usize, usize, f64)> {
    let cut = trace.n / 2;
    trace
        .spectra
        .iter()
        .flat_map(|(step, sp)| sp.iter().enumerate().map(move |(i, &l)| (*step, cut, i + 1, l)))
        .collect()
}

pub fn write_trace_csv<W: std::io::Write>(trace: &DynamicsTrace, seed: u64, config_hash: &str, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["step", "cut", "index", "lambda", "seed", "config_hash"])?;
    for (step, cut, i, l) in trace_rows(trace) {
        wr.write_record([step.to_string(), cut.to_string(), i.to_string(), format!("{l:e}"), seed.to_string(), config_hash.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayRow {
    pub block: usize,
    pub mean_entropy: f64,
    pub stderr: f64,
    pub instances: usize,
}

/// Post-measurement entanglement across a measured central block of a
/// depth-2 1D Haar circuit: for each block size, samples the block outcome
/// by the Born rule and computes `S(A)` of the remaining pure state, `A`
/// being the qubits left of the block. Instance `i` uses gate seed
/// `derive_seed(seed, i)`, shared across block sizes.
pub fn entanglement_decay(n: usize, q: usize, blocks: &[usize], instances: usize, seed: u64) -> Result<Vec<DecayRow>> {
    let layout = one_d_brickwork_layout(n, q)?;
    for &b in blocks {
        if b == 0 || b + 2 > n {
            return Err(Error::InvalidArgument(format!("block of {b} in a chain of {n}")));
        }
    }
    let per: Vec<Result<Vec<f64>>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let inst = CircuitInstance::sample(layout.clone(), rng::derive_seed(seed, i as u64));
            let psi = simulate_exact(&inst)?;
            let mut mrng = rng::tagged(seed, rng::domain::MEASURE, i as u64);
            blocks
                .iter()
                .map(|&b| {
                    let start = (n - b) / 2;
                    let mut s = psi.clone();
                    for site in start..start + b {
                        let p: Vec<f64> = (0..q).map(|o| s.clone().project(site, o).unwrap_or(0.0)).collect();
                        let o = sample_index(&p, &mut mrng);
                        s.project(site, o)?;
                    }
                    let region: Vec<usize> = (0..start).collect();
                    von_neumann_bits(&reduced_density(&s, &region)?)
                })
                .collect()
        })
        .collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(instances); blocks.len()];
    for r in per {
        for (k, v) in r?.into_iter().enumerate() {
            cols[k].push(v);
        }
    }
    Ok(blocks
        .iter()
        .zip(cols)
        .map(|(&b, v)| DecayRow { block: b, mean_entropy: stats::mean(&v), stderr: stats::std_err(&v), instances: v.len() })
        .collect())
}
