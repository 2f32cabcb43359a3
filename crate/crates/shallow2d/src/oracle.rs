//! Brute-force statevector simulation: the reference every approximate
//! algorithm is checked against.

use std::collections::BTreeMap;


use crate::architecture::{CircuitInstance, Site};
use crate::error::{Error, Result};
use crate::tensor::{apply_local, ComplexTensor, C64, ONE, ZERO};

/// Default size guard: `n log2 q <= 24`.
pub const DEFAULT_CAP_BITS: f64 = 24.0;

#[derive(Clone, Debug)]
pub struct Statevector {
    pub n_sites: usize,
    pub local_dim: usize,
    pub amplitudes: Vec<C64>,
}

pub fn check_cap(n_sites: usize, q: usize, cap_bits: f64) -> Result<()> {
    let bits = n_sites as f64 * (q as f64).log2();
    if bits > cap_bits + 1e-9 {
        return Err(Error::ResourceCap(format!(
            "{n_sites} qudits of dimension {q} need {bits:.1} bits, cap is {cap_bits}"
        )));
    }
    Ok(())
}

impl Statevector {
    /// All sites in basis state 0.
    pub fn zero(n_sites: usize, local_dim: usize) -> Self {
        let mut amplitudes = vec![ZERO; local_dim.pow(n_sites as u32)];
        amplitudes[0] = ONE;
        Self { n_sites, local_dim, amplitudes }
    }

    pub fn from_amplitudes(n_sites: usize, local_dim: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != local_dim.pow(n_sites as u32) {
            return Err(Error::Shape(format!("{} amplitudes for {n_sites} sites", amplitudes.len())));
        }
        Ok(Self { n_sites, local_dim, amplitudes })
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![self.local_dim; self.n_sites]
    }

    pub fn apply(&mut self, sites: &[usize], op: &ComplexTensor) {
        let dims = self.dims();
        apply_local(&mut self.amplitudes, &dims, sites, op.data());
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroNorm("statevector".into()));
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(())
    }

    pub fn probabilities(&self) -> OutputDistribution {
        OutputDistribution {
            n_sites: self.n_sites,
            local_dim: self.local_dim,
            probs: self.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
        }
    }

    /// Projects `site` onto `outcome` and renormalizes; returns the Born
    /// probability. The site stays in the register (in basis state `outcome`).
    pub fn project(&mut self, site: usize, outcome: usize) -> Result<f64> {
        let q = self.local_dim;
        let stride = q.pow((self.n_sites - 1 - site) as u32);
        let mut p = 0.0;
        for (idx, a) in self.amplitudes.iter_mut().enumerate() {
            if (idx / stride) % q == outcome {
                p += a.norm_sqr();
            } else {
                *a = ZERO;
            }
        }
        if p > 0.0 {
            let s = p.sqrt();
            self.amplitudes.iter_mut().for_each(|a| *a /= s);
        }
        Ok(p)
    }
}

pub fn simulate_exact(instance: &CircuitInstance) -> Result<Statevector> {
    simulate_exact_with_cap(instance, DEFAULT_CAP_BITS)
}

pub fn simulate_exact_with_cap(instance: &CircuitInstance, cap_bits: f64) -> Result<Statevector> {
    let layout = &instance.layout;
    check_cap(layout.n_sites(), layout.q, cap_bits)?;
    let mut sv = Statevector::zero(layout.n_sites(), layout.q);
    for (ev, g) in layout.events.iter().zip(&instance.gates) {
        let sites: Vec<usize> = ev.sites.iter().map(|&s| layout.site_index(s)).collect();
        sv.apply(&sites, g);
    }
    Ok(sv)
}

/// Runs only `gates` (indices into the layout, applied in layout order) on
/// the register `sites`, which must contain every site those gates touch.
/// Amplitude order follows `sites`.
pub fn simulate_subcircuit(
    instance: &CircuitInstance,
    gates: &[usize],
    sites: &[Site],
    cap_bits: f64,
) -> Result<Statevector> {
    let layout = &instance.layout;
    check_cap(sites.len(), layout.q, cap_bits)?;
    let pos: BTreeMap<Site, usize> = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut order = gates.to_vec();
    order.sort_unstable();
    let mut sv = Statevector::zero(sites.len(), layout.q);
    for g in order {
        let ev = &layout.events[g];
        let local: Vec<usize> = ev
            .sites
            .iter()
            .map(|s| pos.get(s).copied().ok_or_else(|| Error::InvalidArgument(format!("gate {g} touches {s:?} outside the register"))))
            .collect::<Result<_>>()?;
        sv.apply(&local, &instance.gates[g]);
    }
    Ok(sv)
}

/// Reduced density matrix on `region` (indices into the register; the
/// matrix index lists region sites in the given order).
pub fn reduced_density(state: &Statevector, region: &[usize]) -> Result<ComplexTensor> {
    let n = state.n_sites;
    let q = state.local_dim;
    for (k, &r) in region.iter().enumerate() {
        if r >= n || region[..k].contains(&r) {
            return Err(Error::InvalidArgument(format!("bad region {region:?}")));
        }
    }
    check_cap(2 * region.len(), q, 2.0 * DEFAULT_CAP_BITS)?;
    let rest: Vec<usize> = (0..n).filter(|i| !region.contains(i)).collect();
    let perm: Vec<usize> = region.iter().chain(&rest).copied().collect();
    let t = ComplexTensor::new(vec![q; n], state.amplitudes.clone())?.permute(&perm)?;
    let da = q.pow(region.len() as u32);
    let db = q.pow(rest.len() as u32);
    let m = t.reshape(vec![da, db])?;
    let md = m.to_dmatrix()?;
    let rho = &md * md.adjoint();
    Ok(ComplexTensor::from_dmatrix(&rho))
}

pub fn purity(rho: &ComplexTensor) -> f64 {
    let (r, c) = rho.dims2().expect("matrix");
    let d = rho.data();
    let mut s = 0.0;
    for i in 0..r {
        for j in 0..c {
            s += (d[i * c + j] * d[j * c + i]).re;
        }
    }
    s
}

/// Eigenvalues of a Hermitian matrix, non-increasing.
pub fn hermitian_eigenvalues(rho: &ComplexTensor) -> Result<Vec<f64>> {
    let (r, c) = rho.dims2()?;
    if r != c {
        return Err(Error::Shape(format!("{r}x{c} density matrix")));
    }
    let m = faer::Mat::<C64>::from_fn(r, c, |i, j| rho.get(&[i, j]));
    let mut ev = m
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::Unsupported("Hermitian eigensolver did not converge".into()))?;
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Von Neumann entropy in bits of a density matrix normalized by its trace.
pub fn von_neumann_bits(rho: &ComplexTensor) -> Result<f64> {
    let ev = hermitian_eigenvalues(rho)?;
    let tr: f64 = ev.iter().sum();
    Ok(shannon_bits(ev.iter().map(|x| x.max(0.0) / tr)))
}

pub fn shannon_bits(p: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter().filter(|&x| x > 0.0).map(|x| -x * x.log2()).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputDistribution {
    pub n_sites: usize,
    pub local_dim: usize,
    pub probs: Vec<f64>,
}

impl OutputDistribution {
    pub fn new(n_sites: usize, local_dim: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != local_dim.pow(n_sites as u32) {
            return Err(Error::Shape(format!("{} probabilities for {n_sites} sites", probs.len())));
        }
        Ok(Self { n_sites, local_dim, probs })
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn index_of(&self, x: &[usize]) -> usize {
        x.iter().fold(0, |acc, &d| acc * self.local_dim + d)
    }

    pub fn outcome_of(&self, mut idx: usize) -> Vec<usize> {
        let mut x = vec![0; self.n_sites];
        for k in (0..self.n_sites).rev() {
            x[k] = idx % self.local_dim;
            idx /= self.local_dim;
        }
        x
    }

    pub fn prob(&self, x: &[usize]) -> f64 {
        self.probs[self.index_of(x)]
    }

    /// Marginal on `region` (positions into this distribution, in the given order).
    pub fn marginal(&self, region: &[usize]) -> OutputDistribution {
        let q = self.local_dim;
        let n = self.n_sites;
        let mut out = vec![0.0; q.pow(region.len() as u32)];
        let strides: Vec<usize> = region.iter().map(|&r| q.pow((n - 1 - r) as u32)).collect();
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut m = 0usize;
            for &s in &strides {
                m = m * q + (idx / s) % q;
            }
            out[m] += p;
        }
        OutputDistribution { n_sites: region.len(), local_dim: q, probs: out }
    }

    pub fn entropy_bits(&self) -> f64 {
        let t = self.total();
        shannon_bits(self.probs.iter().map(|p| p / t))
    }

    /// Total-variation distance (half the 1-norm difference).
    pub fn tv(&self, other: &OutputDistribution) -> f64 {
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Product distribution `self ⊗ other`, with `self` more significant.
    pub fn product(&self, other: &OutputDistribution) -> OutputDistribution {
        let mut probs = Vec::with_capacity(self.probs.len() * other.probs.len());
        for &a in &self.probs {
            for &b in &other.probs {
                probs.push(a * b);
            }
        }
        OutputDistribution { n_sites: self.n_sites + other.n_sites, local_dim: self.local_dim, probs }
    }

    /// Reorders sites: output position `k` holds input site `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> OutputDistribution {
        let q = self.local_dim;
        let n = self.n_sites;
        let mut out = vec![0.0; self.probs.len()];
        let strides: Vec<usize> = perm.iter().map(|&r| q.pow((n - 1 - r) as u32)).collect();
        for (idx, &p) in self.probs.iter().enumerate() {
            let mut m = 0usize;
            for &s in &strides {
                m = m * q + (idx / s) % q;
            }
            out[m] = p;
        }
        OutputDistribution { n_sites: n, local_dim: q, probs: out }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct EntropyReport {
    pub s_ab: f64,
    pub s_bc: f64,
    pub s_b: f64,
    pub s_abc: f64,
    /// `S(AB) + S(BC) - S(B) - S(ABC)`.
    pub cmi: f64,
}

/// Shannon entropies (bits) of the marginals of `dist` and the conditional
/// mutual information `I(A:C|B)`.
pub fn exact_entropies(dist: &OutputDistribution, a: &[usize], b: &[usize], c: &[usize]) -> Result<EntropyReport> {
    let all: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
    for (k, &x) in all.iter().enumerate() {
        if x >= dist.n_sites || all[..k].contains(&x) {
            return Err(Error::InvalidArgument("A, B, C must be disjoint site sets".into()));
        }
    }
    let cat = |u: &[usize], v: &[usize]| -> Vec<usize> { u.iter().chain(v).copied().collect() };
    let s_ab = dist.marginal(&cat(a, b)).entropy_bits();
    let s_bc = dist.marginal(&cat(b, c)).entropy_bits();
    let s_b = dist.marginal(b).entropy_bits();
    let s_abc = dist.marginal(&all).entropy_bits();
    Ok(EntropyReport { s_ab, s_bc, s_b, s_abc, cmi: s_ab + s_bc - s_b - s_abc })
}
