//! Second-moment (k = 2) spin models of Haar circuits.
//!
//! Every Haar gate contributes an incoming and an outgoing node carrying a
//! permutation in `S_2 = {e, swap}`. Incoming and outgoing nodes of one gate
//! are joined by the Weingarten weight; an outgoing node feeds the incoming
//! node of the next gate on each of its qudits with weight `q^C(s t^-1)`,
//! where `C` counts cycles (2 for `e`, 1 for `swap`). Input qudits in a
//! product state contribute 1. At the end each qudit meets a boundary: the
//! plain trace (`q^C(t)`), the swap (`q^C(t swap)`), or the diagonal
//! `sum_x |xx><xx|` of a measured or dephased qudit, which contributes a
//! constant `q`.
//!
//! Summing out the incoming nodes leaves a model on outgoing nodes with
//! non-negative weights; that is the form used for Monte Carlo.

use std::collections::BTreeSet;

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::architecture::{brickwork_layout, CircuitInstance, CircuitLayout, GateKind, Site};
use crate::error::{Error, Result};
use crate::oracle::{check_cap, simulate_exact, Statevector};
use crate::rng;
use crate::stats;
use crate::tensor::C64;

/// Element of `S_2`; `true` is the swap.
pub type Perm = bool;

pub const E: Perm = false;
pub const SWAP: Perm = true;

/// Cycle count of a permutation of two copies.
pub fn cycles(p: Perm) -> u32 {
    if p {
        1
    } else {
        2
    }
}

/// Weingarten function of `U(dim)` at k = 2: `1/(D^2-1)` for `e`,
/// `-1/(D(D^2-1))` for the swap.
pub fn weingarten_k2_dim(p: Perm, dim: i64) -> Ratio<i64> {
    let d2 = dim * dim - 1;
    if p {
        Ratio::new(-1, dim * d2)
    } else {
        Ratio::new(1, d2)
    }
}

/// Weingarten weight of a two-qudit Haar gate, i.e. over `U(q^2)`:
/// `1/(q^4-1)` and `-1/(q^2(q^4-1))`.
pub fn weingarten_k2(p: Perm, q: i64) -> Ratio<i64> {
    weingarten_k2_dim(p, q * q)
}

pub fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Trace,
    Swap,
    /// Measured or dephased qudit.
    Diagonal,
}

/// Boundary per site (row-major) for a region `a` and a measured set.
/// With `dephased`, the region is dephased too.
pub fn boundaries(layout: &CircuitLayout, a: &[Site], measured: &[Site], dephased: bool) -> Vec<Boundary> {
    let a: BTreeSet<Site> = a.iter().copied().collect();
    let m: BTreeSet<Site> = measured.iter().copied().collect();
    layout
        .sites()
        .into_iter()
        .map(|s| {
            if m.contains(&s) || (dephased && a.contains(&s)) {
                Boundary::Diagonal
            } else if a.contains(&s) {
                Boundary::Swap
            } else {
                Boundary::Trace
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub nodes: Vec<usize>,
    /// Indexed by the node spins, `nodes[0]` most significant, swap = 1.
    pub table: Vec<f64>,
}

impl Factor {
    fn eval(&self, config: &[Perm]) -> f64 {
        let idx = self.nodes.iter().fold(0usize, |acc, &n| (acc << 1) | config[n] as usize);
        self.table[idx]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Incoming,
    Outgoing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub gate: usize,
    pub role: NodeRole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinModel {
    pub q: usize,
    pub nodes: Vec<Node>,
    pub factors: Vec<Factor>,
    /// Auxiliary (boundary) spins, one per site that any gate touches.
    pub auxiliary: Vec<(Site, Boundary)>,
    /// True when incoming nodes have been summed out.
    pub decimated: bool,
}

fn q_pow(q: usize, c: u32) -> f64 {
    (q as f64).powi(c as i32)
}

fn boundary_weight(b: Boundary, q: usize, t: Perm) -> f64 {
    match b {
        Boundary::Trace => q_pow(q, cycles(t)),
        Boundary::Swap => q_pow(q, cycles(t ^ SWAP)),
        Boundary::Diagonal => q as f64,
    }
}

struct GateGraph {
    /// Per random gate: layout event index, unitary dimension, predecessor
    /// gates (one entry per input qudit that comes from a gate).
    gates: Vec<(usize, i64, Vec<usize>)>,
    /// Per touched site: last gate.
    last: Vec<(Site, usize)>,
}

fn gate_graph(layout: &CircuitLayout) -> Result<GateGraph> {
    let mut last_on: std::collections::BTreeMap<Site, usize> = Default::default();
    let mut gates = Vec::new();
    for (idx, ev) in layout.events.iter().enumerate() {
        if !ev.kind.is_random() {
            return Err(Error::Unsupported(format!("event {idx}: {:?} is not Haar-random", ev.kind)));
        }
        let g = gates.len();
        let preds = ev.sites.iter().filter_map(|s| last_on.get(s).copied()).collect();
        let dim = (layout.q as i64).pow(ev.sites.len() as u32);
        gates.push((idx, dim, preds));
        for s in &ev.sites {
            last_on.insert(*s, g);
        }
    }
    Ok(GateGraph { gates, last: last_on.into_iter().collect() })
}

fn pair_table(f: impl Fn(Perm, Perm) -> f64) -> Vec<f64> {
    vec![f(E, E), f(E, SWAP), f(SWAP, E), f(SWAP, SWAP)]
}

/// Spin model of `E tr(rho^(x2) B)` for a circuit of Haar gates with the
/// boundary `bounds` (one entry per site, row-major).
pub fn build_spin_model(layout: &CircuitLayout, bounds: &[Boundary]) -> Result<SpinModel> {
    if bounds.len() != layout.n_sites() {
        return Err(Error::InvalidArgument(format!("{} boundaries for {} sites", bounds.len(), layout.n_sites())));
    }
    let gg = gate_graph(layout)?;
    let q = layout.q;
    let mut nodes = Vec::new();
    let mut factors = Vec::new();
    for (g, (ev, dim, preds)) in gg.gates.iter().enumerate() {
        nodes.push(Node { gate: *ev, role: NodeRole::Incoming });
        nodes.push(Node { gate: *ev, role: NodeRole::Outgoing });
        let d = *dim;
        factors.push(Factor { nodes: vec![2 * g, 2 * g + 1], table: pair_table(|a, b| ratio_f64(weingarten_k2_dim(a ^ b, d))) });
        for &p in preds {
            factors.push(Factor { nodes: vec![2 * p + 1, 2 * g], table: pair_table(|a, b| q_pow(q, cycles(a ^ b))) });
        }
    }
    let mut auxiliary = Vec::new();
    for &(s, g) in &gg.last {
        let b = bounds[layout.site_index(s)];
        auxiliary.push((s, b));
        factors.push(Factor { nodes: vec![2 * g + 1], table: vec![boundary_weight(b, q, E), boundary_weight(b, q, SWAP)] });
    }
    Ok(SpinModel { q, nodes, factors, auxiliary, decimated: false })
}

/// Weight of a gate after summing out its incoming node, as a function of
/// its outgoing spin `t` and the outgoing spins of its predecessors.
pub fn decimated_weight(q: usize, dim: i64, t: Perm, preds: &[Perm]) -> f64 {
    [E, SWAP]
        .iter()
        .map(|&s| {
            let w = ratio_f64(weingarten_k2_dim(s ^ t, dim));
            w * preds.iter().map(|&p| q_pow(q, cycles(s ^ p))).product::<f64>()
        })
        .sum()
}

/// The same model with every incoming node summed out: one node per gate.
pub fn build_decimated_model(layout: &CircuitLayout, bounds: &[Boundary]) -> Result<SpinModel> {
    if bounds.len() != layout.n_sites() {
        return Err(Error::InvalidArgument(format!("{} boundaries for {} sites", bounds.len(), layout.n_sites())));
    }
    let gg = gate_graph(layout)?;
    let q = layout.q;
    let mut nodes = Vec::new();
    let mut factors = Vec::new();
    for (g, (ev, dim, preds)) in gg.gates.iter().enumerate() {
        nodes.push(Node { gate: *ev, role: NodeRole::Outgoing });
        let k = preds.len();
        let mut table = Vec::with_capacity(1 << (k + 1));
        for idx in 0..1usize << (k + 1) {
            let t = (idx >> k) & 1 == 1;
            let ps: Vec<Perm> = (0..k).map(|j| (idx >> (k - 1 - j)) & 1 == 1).collect();
            table.push(decimated_weight(q, *dim, t, &ps));
        }
        let mut fnodes = vec![g];
        fnodes.extend(preds);
        factors.push(Factor { nodes: fnodes, table });
    }
    let mut auxiliary = Vec::new();
    for &(s, g) in &gg.last {
        let b = bounds[layout.site_index(s)];
        auxiliary.push((s, b));
        factors.push(Factor { nodes: vec![g], table: vec![boundary_weight(b, q, E), boundary_weight(b, q, SWAP)] });
    }
    Ok(SpinModel { q, nodes, factors, auxiliary, decimated: true })
}

/// Largest free-spin count [`partition_function_exact`] enumerates.
pub const ENUMERATION_CAP: usize = 24;

impl SpinModel {
    pub fn weight(&self, config: &[Perm]) -> f64 {
        self.factors.iter().map(|f| f.eval(config)).product()
    }

    /// Degree of every node (number of two-or-more-body factors it joins,
    /// counting one per other node) plus its auxiliary link.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for f in &self.factors {
            if f.nodes.len() == 1 {
                deg[f.nodes[0]] += 1;
            } else {
                for &n in &f.nodes {
                    deg[n] += f.nodes.len() - 1;
                }
            }
        }
        deg
    }
}

pub fn partition_function_exact(model: &SpinModel) -> Result<f64> {
    let n = model.nodes.len();
    if n > ENUMERATION_CAP {
        return Err(Error::ResourceCap(format!("{n} free spins, enumeration cap is {ENUMERATION_CAP}")));
    }
    let total: f64 = (0..1u64 << n)
        .into_par_iter()
        .map(|mask| {
            let config: Vec<Perm> = (0..n).map(|i| (mask >> i) & 1 == 1).collect();
            model.weight(&config)
        })
        .sum();
    Ok(total)
}

/// `tr(rho^(x2) B)` of a pure state for per-site boundaries `bounds`:
/// `sum_d tr(rho_{d,S}^2)` over diagonal-site strings `d`, with `S` the
/// swap sites and the trace sites summed out.
pub fn boundary_overlap(state: &Statevector, bounds: &[Boundary]) -> Result<f64> {
    let n = state.n_sites;
    let q = state.local_dim;
    let pick = |b: Boundary| -> Vec<usize> { (0..n).filter(|&i| bounds[i] == b).collect() };
    let (dg, sw, tr) = (pick(Boundary::Diagonal), pick(Boundary::Swap), pick(Boundary::Trace));
    let perm: Vec<usize> = dg.iter().chain(&sw).chain(&tr).copied().collect();
    let t = crate::tensor::ComplexTensor::new(vec![q; n], state.amplitudes.clone())?.permute(&perm)?;
    let (nd, ns, nt) = (q.pow(dg.len() as u32), q.pow(sw.len() as u32), q.pow(tr.len() as u32));
    let data = t.data();
    let mut z = 0.0;
    let mut rho = vec![C64::new(0.0, 0.0); ns * ns];
    for d in 0..nd {
        let block = &data[d * ns * nt..(d + 1) * ns * nt];
        rho.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for a in 0..ns {
            for b in 0..ns {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..nt {
                    acc += block[a * nt + c] * block[b * nt + c].conj();
                }
                rho[a * ns + b] = acc;
            }
        }
        for a in 0..ns {
            for b in 0..ns {
                z += (rho[a * ns + b] * rho[b * ns + a]).re;
            }
        }
    }
    Ok(z)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Circuit average of `tr(rho^(x2) B)` over `samples` Haar instances
/// (instance `i` uses gate seed `derive_seed(seed, i)`).
pub fn circuit_average(layout: &CircuitLayout, bounds: &[Boundary], samples: usize, seed: u64) -> Result<MonteCarloEstimate> {
    check_cap(layout.n_sites(), layout.q, 16.0)?;
    let vals: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let inst = CircuitInstance::sample(layout.clone(), rng::derive_seed(seed, i as u64));
            let psi = simulate_exact(&inst)?;
            boundary_overlap(&psi, bounds)
        })
        .collect::<Result<_>>()?;
    Ok(MonteCarloEstimate { mean: stats::mean(&vals), stderr: stats::std_err(&vals), samples })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingSet {
    pub q: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BrickworkCouplings {
    pub q: f64,
    pub j_vert: f64,
    pub j_horiz: f64,
}

/// `w = 2/(q+1)`, `J1 = J2 = ln((q^2-w^2)/(w^2 q^2-1))/4`,
/// `J3 = -ln(w(q^2-1)/sqrt((q^2-w^2)(q^2 w^2-1)))/2`.
pub fn weak_measurement_couplings(q: f64) -> Result<CouplingSet> {
    let w = 2.0 / (q + 1.0);
    let a = q * q - w * w;
    let b = w * w * q * q - 1.0;
    if !(q > 1.0 && a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(format!("couplings undefined at q = {q}")));
    }
    let j1 = 0.25 * (a / b).ln();
    let j3 = -0.5 * (w * (q * q - 1.0) / (a * b).sqrt()).ln();
    Ok(CouplingSet { q, j1, j2: j1, j3 })
}

/// `sinh 2J1 sinh 2J2 + sinh 2J2 sinh 2J3 + sinh 2J1 sinh 2J3`; the
/// anisotropic triangular model is critical where this equals 1.
pub fn triangular_criterion(c: &CouplingSet) -> f64 {
    let (a, b, d) = ((2.0 * c.j1).sinh(), (2.0 * c.j2).sinh(), (2.0 * c.j3).sinh());
    a * b + b * d + a * d
}

/// Critical local dimension by bisection on `[3, 4]` to `1e-10`.
pub fn triangular_critical_q() -> Result<f64> {
    let f = |q: f64| -> Result<f64> { Ok(triangular_criterion(&weak_measurement_couplings(q)?) - 1.0) };
    let (mut lo, mut hi) = (3.0, 4.0);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracketing(format!("criterion - 1 has the same sign at 3 ({flo}) and 4 ({fhi})")));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid)?.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `J_vert = ln((q^2+1)/(2q))/2`,
/// `J_horiz = ln((q^6+q^4-4q^3+q^2+1)/(2q^5-2q^4-2q^2+2q))/2`.
pub fn brickwork_couplings(q: f64) -> Result<BrickworkCouplings> {
    if q < 2.0 {
        return Err(Error::InvalidArgument(format!("brickwork couplings need q >= 2, got {q}")));
    }
    let j_vert = 0.5 * ((q * q + 1.0) / (2.0 * q)).ln();
    let num = q.powi(6) + q.powi(4) - 4.0 * q.powi(3) + q * q + 1.0;
    let den = 2.0 * q.powi(5) - 2.0 * q.powi(4) - 2.0 * q * q + 2.0 * q;
    Ok(BrickworkCouplings { q, j_vert, j_horiz: 0.5 * (num / den).ln() })
}

/// Critical coupling of the isotropic square-lattice Ising model.
pub fn j_square() -> f64 {
    0.5 * (1.0 + std::f64::consts::SQRT_2).ln()
}

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DephasedCmi {
    /// `(1 - gamma)/ln 2`.
    pub closed_form: f64,
    /// The same constant from `lim_{k->1} log2(k!)/(k-1)` evaluated numerically.
    pub numeric: f64,
    pub s_ab: f64,
    pub s_bc: f64,
    pub s_b: f64,
    pub s_abc: f64,
}

/// `log2(k!)/(k-1)` near `k = 1`, by Richardson extrapolation of central
/// differences of `ln Gamma` at 2.
pub fn log_factorial_slope_at_one() -> f64 {
    use statrs::function::gamma::ln_gamma;
    let d = |h: f64| (ln_gamma(2.0 + h) - ln_gamma(2.0 - h)) / (2.0 * h);
    let (h1, h2) = (1e-2, 5e-3);
    let r = (4.0 * d(h2) - d(h1)) / 3.0;
    r / std::f64::consts::LN_2
}

/// Average dephased CMI at `q -> infinity` for a tripartition with the
/// given sizes: strict subregions carry `|X| log2 q` while the whole system
/// carries `n log2 q - (1 - gamma)/ln 2`, so the CMI is the constant itself.
/// Entropies are reported per `log2 q` unit offsets with `log2 q = 1`.
pub fn dephased_cmi_infinite_q(a: usize, b: usize, c: usize) -> DephasedCmi {
    let k = log_factorial_slope_at_one();
    let s = |x: usize| x as f64;
    let s_abc = s(a + b + c) - k;
    let (s_ab, s_bc, s_b) = (s(a + b), s(b + c), s(b));
    DephasedCmi {
        closed_form: (1.0 - EULER_GAMMA) / std::f64::consts::LN_2,
        numeric: s_ab + s_bc - s_b - s_abc,
        s_ab,
        s_bc,
        s_b,
        s_abc,
    }
}

/// Metropolis sampler on a non-negative model with single spin flips.
pub struct Metropolis<'m> {
    model: &'m SpinModel,
    adj: Vec<Vec<usize>>,
    pub config: Vec<Perm>,
}

impl<'m> Metropolis<'m> {
    pub fn new(model: &'m SpinModel) -> Result<Self> {
        if model.factors.iter().any(|f| f.table.iter().any(|&w| w < 0.0)) {
            return Err(Error::InvalidArgument("Metropolis needs non-negative weights; decimate first".into()));
        }
        let mut adj = vec![Vec::new(); model.nodes.len()];
        for (k, f) in model.factors.iter().enumerate() {
            for &n in &f.nodes {
                if !adj[n].contains(&k) {
                    adj[n].push(k);
                }
            }
        }
        let config = vec![E; model.nodes.len()];
        if model.weight(&config) <= 0.0 {
            return Err(Error::InvalidArgument("all-identity configuration has zero weight".into()));
        }
        Ok(Self { model, adj, config })
    }

    fn local(&self, n: usize) -> f64 {
        self.adj[n].iter().map(|&k| self.model.factors[k].eval(&self.config)).product()
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for n in 0..self.config.len() {
            let before = self.local(n);
            self.config[n] ^= true;
            let after = self.local(n);
            let accept = after >= before || rng.random::<f64>() * before < after;
            if !accept {
                self.config[n] ^= true;
            }
        }
    }
}

/// Which gate's outgoing node each site ends on (decimated node index).
fn last_gate_of(layout: &CircuitLayout) -> Result<std::collections::BTreeMap<Site, usize>> {
    Ok(gate_graph(layout)?.last.into_iter().collect())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuasiEntropy {
    /// `-log2(E Z_A / E Z_0)`.
    pub value: f64,
    pub stderr: f64,
    /// All twist chains passed the split-chain check.
    pub converged: bool,
}

/// Exact quasi-entropy by enumeration of the decimated model.
pub fn quasi_entropy_exact(layout: &CircuitLayout, a: &[Site], measured: &[Site]) -> Result<f64> {
    let za = partition_function_exact(&build_decimated_model(layout, &boundaries(layout, a, measured, false))?)?;
    let z0 = partition_function_exact(&build_decimated_model(layout, &boundaries(layout, &[], measured, false))?)?;
    Ok(-(za / z0).log2())
}

/// Quasi-entropy by Metropolis on the decimated model, twisting the
/// boundary of one site of `a` at a time from the trace to the swap and
/// multiplying the estimated ratios.
pub fn quasi_entropy_mc(layout: &CircuitLayout, a: &[Site], measured: &[Site], sweeps: usize, burn_in: usize, seed: u64) -> Result<QuasiEntropy> {
    let last = last_gate_of(layout)?;
    let q = layout.q as f64;
    let mut ln_ratio = 0.0;
    let mut var = 0.0;
    let mut converged = true;
    for k in 0..a.len() {
        let Some(&node) = last.get(&a[k]) else { continue };
        let model = build_decimated_model(layout, &boundaries(layout, &a[..k], measured, false))?;
        let mut mc = Metropolis::new(&model)?;
        let mut r = rng::tagged(seed, rng::domain::TASK, k as u64);
        for _ in 0..burn_in {
            mc.sweep(&mut r);
        }
        let mut obs = Vec::with_capacity(sweeps);
        for _ in 0..sweeps {
            mc.sweep(&mut r);
            // Ratio of swap to trace boundary weight on this site's spin.
            obs.push(if mc.config[node] { q } else { 1.0 / q });
        }
        let (m, se) = batch_mean(&obs, 20);
        let half = obs.len() / 2;
        let (m1, m2) = (stats::mean(&obs[..half]), stats::mean(&obs[half..]));
        if (m1 - m2).abs() > 4.0 * se * 2.0f64.sqrt() + 1e-12 {
            converged = false;
        }
        ln_ratio += m.ln();
        var += (se / m).powi(2);
    }
    Ok(QuasiEntropy { value: -ln_ratio / std::f64::consts::LN_2, stderr: var.sqrt() / std::f64::consts::LN_2, converged })
}

fn batch_mean(xs: &[f64], batches: usize) -> (f64, f64) {
    let size = (xs.len() / batches).max(1);
    let means: Vec<f64> = xs.chunks(size).filter(|c| c.len() == size).map(stats::mean).collect();
    (stats::mean(xs), stats::std_err(&means))
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiEntropyRow {
    pub q: usize,
    pub rows: usize,
    pub cols: usize,
    pub region: usize,
    pub s2: f64,
    pub stderr: f64,
    pub exact: bool,
    pub converged: bool,
}

/// Brickwork strips of height `rows` and width `measured_cols + open_cols`:
/// the first `measured_cols` columns are measured, and `A` is the top half
/// of the open columns. Uses exact enumeration when the decimated model is
/// small enough, Metropolis otherwise.
pub fn quasi_entropy_scan(
    q: usize,
    heights: &[usize],
    measured_cols: usize,
    open_cols: usize,
    sweeps: usize,
    seed: u64,
) -> Result<Vec<QuasiEntropyRow>> {
    let mut out = Vec::new();
    for &rows in heights {
        let cols = measured_cols + open_cols;
        let layout = brickwork_layout(rows, cols, q)?;
        let measured: Vec<Site> = (0..rows).flat_map(|i| (0..measured_cols).map(move |j| Site::new(i, j))).collect();
        let a: Vec<Site> = (0..rows / 2).flat_map(|i| (measured_cols..cols).map(move |j| Site::new(i, j))).collect();
        let n_gates = layout.events.iter().filter(|e| e.kind == GateKind::HaarTwoSite).count();
        let row = if n_gates <= ENUMERATION_CAP {
            let v = quasi_entropy_exact(&layout, &a, &measured)?;
            QuasiEntropyRow { q, rows, cols, region: a.len(), s2: v, stderr: 0.0, exact: true, converged: true }
        } else {
            let e = quasi_entropy_mc(&layout, &a, &measured, sweeps, sweeps / 5, rng::derive_seed(seed, rows as u64))?;
            QuasiEntropyRow { q, rows, cols, region: a.len(), s2: e.value, stderr: e.stderr, exact: false, converged: e.converged }
        };
        out.push(row);
    }
    Ok(out)
}
