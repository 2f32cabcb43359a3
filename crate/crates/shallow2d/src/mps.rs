//! Open-boundary matrix product states whose sites carry a list of physical
//! factors. SEBD keeps one chain site per lattice row and grows or shrinks
//! the factor list as columns enter and leave the lightcone.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{apply_local, gemm, qr_dm, svd_sorted, truncate_factors, ComplexTensor, C64, ONE, ZERO};

/// Relative floor below which singular values produced by a gate split are
/// treated as exact zeros.
pub const SPLIT_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct TruncationPolicy {
    /// Squared-discard budget per bond per compression.
    pub eps: f64,
    /// Bond dimension cutoff; `None` is unbounded.
    pub max_bond: Option<usize>,
}

impl TruncationPolicy {
    pub fn exact() -> Self {
        Self { eps: 0.0, max_bond: None }
    }

    pub fn new(eps: f64, max_bond: Option<usize>) -> Result<Self> {
        if eps.is_nan() || eps < 0.0 {
            return Err(Error::InvalidArgument(format!("eps must be >= 0, got {eps}")));
        }
        if max_bond == Some(0) {
            return Err(Error::InvalidArgument("max bond must be positive".into()));
        }
        Ok(Self { eps, max_bond })
    }

    pub fn exceeds(&self, bond: usize) -> bool {
        self.max_bond.is_some_and(|d| bond > d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationRecord {
    pub iteration: usize,
    pub bond: usize,
    /// Sum of squares of the dropped singular values.
    pub discarded_weight: f64,
    /// Sum of the dropped singular values.
    pub discarded_sum: f64,
    pub bond_dim: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TruncationLog {
    pub records: Vec<TruncationRecord>,
    lambda: f64,
    /// `(iteration, eps_i)` in order of first appearance.
    per_iteration: Vec<(usize, f64)>,
}

impl TruncationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: TruncationRecord) {
        self.lambda += r.discarded_sum;
        match self.per_iteration.last_mut() {
            Some((it, e)) if *it == r.iteration => *e += r.discarded_weight,
            _ => self.per_iteration.push((r.iteration, r.discarded_weight)),
        }
        self.records.push(r);
    }

    /// Sum of all discarded singular values.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Summed squared discards per iteration.
    pub fn epsilons(&self) -> &[(usize, f64)] {
        &self.per_iteration
    }

    pub fn eps_total(&self) -> f64 {
        self.per_iteration.iter().map(|(_, e)| e).sum()
    }

    /// `sum_i sqrt(2 eps_i)`.
    pub fn sqrt_sum(&self) -> f64 {
        self.per_iteration.iter().map(|(_, e)| (2.0 * e).sqrt()).sum()
    }

    pub fn max_bond(&self) -> usize {
        self.records.iter().map(|r| r.bond_dim).max().unwrap_or(1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CompressReport {
    pub discarded_weight: f64,
    pub discarded_sum: f64,
    pub max_bond: usize,
}

#[derive(Clone, Debug)]
pub struct MatrixProductState {
    /// Each site is `[left, phys, right]`.
    tensors: Vec<ComplexTensor>,
    /// Physical factors of each site, most significant first.
    factors: Vec<Vec<usize>>,
    center: usize,
    /// Weight dropped below [`SPLIT_FLOOR`] by gate splits.
    pub split_discard: f64,
}

fn site3(t: &ComplexTensor) -> (usize, usize, usize) {
    let s = t.shape();
    (s[0], s[1], s[2])
}

fn mat_of(data: &[C64], r: usize, c: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(r, c, data)
}

fn rows_of(m: &DMatrix<C64>) -> Vec<C64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

impl MatrixProductState {
    pub fn product_state(dims: &[usize], basis: &[usize]) -> Result<Self> {
        if dims.len() != basis.len() || dims.is_empty() {
            return Err(Error::InvalidArgument("dims and basis indices must be non-empty and equal in length".into()));
        }
        let mut tensors = Vec::with_capacity(dims.len());
        for (&d, &b) in dims.iter().zip(basis) {
            if b >= d {
                return Err(Error::InvalidArgument(format!("basis index {b} out of range for dimension {d}")));
            }
            let mut t = ComplexTensor::zeros(vec![1, d, 1]);
            t.data_mut()[b] = ONE;
            tensors.push(t);
        }
        Ok(Self { tensors, factors: dims.iter().map(|&d| vec![d]).collect(), center: 0, split_discard: 0.0 })
    }

    /// Exact MPS of a dense vector (site 0 most significant).
    pub fn from_dense(amplitudes: &[C64], dims: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().product();
        if amplitudes.len() != total || dims.is_empty() {
            return Err(Error::Shape(format!("{} amplitudes for dims {dims:?}", amplitudes.len())));
        }
        let n = dims.len();
        let mut tensors = Vec::with_capacity(n);
        let mut rest = amplitudes.to_vec();
        let mut left = 1;
        for (k, &d) in dims.iter().enumerate() {
            if k == n - 1 {
                tensors.push(ComplexTensor::new(vec![left, d, 1], rest.clone())?);
                break;
            }
            let cols = rest.len() / (left * d);
            let (q, r) = qr_dm(mat_of(&rest, left * d, cols));
            let chi = q.ncols();
            tensors.push(ComplexTensor::new(vec![left, d, chi], rows_of(&q))?);
            rest = rows_of(&r);
            left = chi;
        }
        Ok(Self { tensors, factors: dims.iter().map(|&d| vec![d]).collect(), center: n - 1, split_discard: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn factors(&self, pos: usize) -> &[usize] {
        &self.factors[pos]
    }

    pub fn physical_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.shape()[1]).collect()
    }

    pub fn tensor(&self, pos: usize) -> &ComplexTensor {
        &self.tensors[pos]
    }

    /// Internal bond extents, `len() - 1` of them.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.shape()[2]).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Norm squared, read off the orthogonality center.
    pub fn norm_sqr(&self) -> f64 {
        self.tensors[self.center].norm_sqr()
    }

    fn normalize_center(&mut self) -> Result<f64> {
        let n = self.norm_sqr();
        if n.is_nan() || n <= 0.0 {
            return Err(Error::ZeroNorm("MPS".into()));
        }
        self.tensors[self.center].scale(C64::new(1.0 / n.sqrt(), 0.0));
        Ok(n)
    }

    fn shift_right(&mut self, k: usize) -> Result<()> {
        let (l, p, r) = site3(&self.tensors[k]);
        let (q, rr) = qr_dm(mat_of(self.tensors[k].data(), l * p, r));
        let chi = q.ncols();
        self.tensors[k] = ComplexTensor::new(vec![l, p, chi], rows_of(&q))?;
        let (_, p2, r2) = site3(&self.tensors[k + 1]);
        let data = gemm(chi, r, p2 * r2, &rows_of(&rr), self.tensors[k + 1].data());
        self.tensors[k + 1] = ComplexTensor::new(vec![chi, p2, r2], data)?;
        Ok(())
    }

    fn shift_left(&mut self, k: usize) -> Result<()> {
        let (l, p, r) = site3(&self.tensors[k]);
        let m = mat_of(self.tensors[k].data(), l, p * r);
        let (q, rr) = qr_dm(m.adjoint());
        let chi = q.ncols();
        self.tensors[k] = ComplexTensor::new(vec![chi, p, r], rows_of(&q.adjoint()))?;
        let (l0, p0, _) = site3(&self.tensors[k - 1]);
        let data = gemm(l0 * p0, l, chi, self.tensors[k - 1].data(), &rows_of(&rr.adjoint()));
        self.tensors[k - 1] = ComplexTensor::new(vec![l0, p0, chi], data)?;
        Ok(())
    }

    pub fn move_center(&mut self, to: usize) -> Result<()> {
        if to >= self.len() {
            return Err(Error::InvalidArgument(format!("position {to} outside chain of {}", self.len())));
        }
        while self.center < to {
            self.shift_right(self.center)?;
            self.center += 1;
        }
        while self.center > to {
            self.shift_left(self.center)?;
            self.center -= 1;
        }
        Ok(())
    }

    /// Applies `op` to factors `targets` of site `pos`. Preserves canonical
    /// form when `op` is unitary.
    pub fn apply_local(&mut self, pos: usize, targets: &[usize], op: &ComplexTensor) -> Result<()> {
        let (l, _, r) = site3(&self.tensors[pos]);
        let mut dims = vec![l];
        dims.extend(&self.factors[pos]);
        dims.push(r);
        let k: usize = targets.iter().map(|&t| self.factors[pos][t]).product();
        if op.shape() != [k, k] {
            return Err(Error::Shape(format!("operator {:?} on factors of total dimension {k}", op.shape())));
        }
        let shifted: Vec<usize> = targets.iter().map(|t| t + 1).collect();
        apply_local(self.tensors[pos].data_mut(), &dims, &shifted, op.data());
        Ok(())
    }

    /// Applies a two-factor gate across the bond `(pos, pos + 1)`: factor
    /// `fa` of site `pos` is the more significant half of `op`, factor `fb`
    /// of site `pos + 1` the less significant. The split keeps every
    /// singular value above [`SPLIT_FLOOR`] relative to the largest, leaves
    /// site `pos` left-isometric and moves the center to `pos + 1`.
    pub fn apply_two_site_factors(&mut self, pos: usize, fa: usize, fb: usize, op: &ComplexTensor) -> Result<()> {
        if pos + 1 >= self.len() {
            return Err(Error::InvalidArgument(format!("no bond to the right of site {pos}")));
        }
        let da = self.factors[pos][fa];
        let db = self.factors[pos + 1][fb];
        if op.shape() != [da * db, da * db] {
            return Err(Error::Shape(format!("operator {:?} on factors {da}x{db}", op.shape())));
        }
        self.move_center(pos)?;
        let theta = self.merged(pos)?;
        let (l, p1, _) = site3(&self.tensors[pos]);
        let (_, p2, r) = site3(&self.tensors[pos + 1]);
        let mut dims = vec![l];
        dims.extend(&self.factors[pos]);
        dims.extend(&self.factors[pos + 1]);
        dims.push(r);
        let mut data = theta;
        let na = self.factors[pos].len();
        apply_local(&mut data, &dims, &[1 + fa, 1 + na + fb], op.data());
        self.split(pos, l, p1, p2, r, &data)
    }

    /// Two-site gate on sites whose physical legs are single factors.
    pub fn apply_two_site(&mut self, pos: usize, gate: &ComplexTensor) -> Result<()> {
        if self.factors[pos].len() != 1 || self.factors.get(pos + 1).map(|f| f.len()) != Some(1) {
            return Err(Error::Unsupported("apply_two_site needs single-factor sites; use apply_two_site_factors".into()));
        }
        self.apply_two_site_factors(pos, 0, 0, gate)
    }

    fn merged(&self, pos: usize) -> Result<Vec<C64>> {
        let (l, p1, m) = site3(&self.tensors[pos]);
        let (_, p2, r) = site3(&self.tensors[pos + 1]);
        Ok(gemm(l * p1, m, p2 * r, self.tensors[pos].data(), self.tensors[pos + 1].data()))
    }

    fn split(&mut self, pos: usize, l: usize, p1: usize, p2: usize, r: usize, theta: &[C64]) -> Result<()> {
        let (u, s, vt) = svd_sorted(mat_of(theta, l * p1, p2 * r))?;
        let smax = s.first().copied().unwrap_or(0.0);
        let keep = s.iter().take_while(|&&x| x > SPLIT_FLOOR * smax).count().max(1);
        self.split_discard += s[keep..].iter().map(|x| x * x).sum::<f64>();
        let mut left = Vec::with_capacity(l * p1 * keep);
        for i in 0..l * p1 {
            for j in 0..keep {
                left.push(u[(i, j)]);
            }
        }
        let mut right = Vec::with_capacity(keep * p2 * r);
        for (i, &sv) in s.iter().enumerate().take(keep) {
            for j in 0..p2 * r {
                right.push(vt[(i, j)] * sv);
            }
        }
        self.tensors[pos] = ComplexTensor::new(vec![l, p1, keep], left)?;
        self.tensors[pos + 1] = ComplexTensor::new(vec![keep, p2, r], right)?;
        self.center = pos + 1;
        Ok(())
    }

    /// Adds a new least-significant factor of dimension `dim` in basis state 0.
    pub fn absorb_site(&mut self, pos: usize, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::InvalidArgument("zero-dimensional factor".into()));
        }
        let (l, p, r) = site3(&self.tensors[pos]);
        let mut t = ComplexTensor::zeros(vec![l, p * dim, r]);
        let src = self.tensors[pos].data();
        let dst = t.data_mut();
        for a in 0..l {
            for b in 0..p {
                let s = (a * p + b) * r;
                let d = (a * p * dim + b * dim) * r;
                dst[d..d + r].copy_from_slice(&src[s..s + r]);
            }
        }
        self.tensors[pos] = t;
        self.factors[pos].push(dim);
        Ok(())
    }

    /// Canonicalizes left to right, then truncates every bond from right to
    /// left so that the squared weight dropped at each bond is at most
    /// `policy.eps`, renormalizing after each bond. Ends with the center at
    /// site 0. The bond cutoff is not applied here; callers check it.
    pub fn compress(&mut self, policy: &TruncationPolicy, iteration: usize, log: &mut TruncationLog) -> Result<CompressReport> {
        let n = self.len();
        self.move_center(n - 1)?;
        self.normalize_center()?;
        let mut rep = CompressReport { max_bond: 1, ..Default::default() };
        for k in (1..n).rev() {
            let (l, p, r) = site3(&self.tensors[k]);
            let (u, s, vt) = svd_sorted(mat_of(self.tensors[k].data(), l, p * r))?;
            let out = truncate_factors(&u, &s, &vt, None, policy.eps);
            let keep = out.singular_values.len();
            let kept_norm = out.singular_values.iter().map(|x| x * x).sum::<f64>().sqrt();
            if kept_norm.is_nan() || kept_norm <= 0.0 {
                return Err(Error::ZeroNorm(format!("bond {} during compression", k - 1)));
            }
            self.tensors[k] = out.right_isometry.reshape(vec![keep, p, r])?;
            // Left neighbour absorbs U S, rescaled to unit norm.
            let mut us = out.left_isometry.into_data();
            for i in 0..l {
                for (j, &sv) in out.singular_values.iter().enumerate() {
                    us[i * keep + j] *= sv / kept_norm;
                }
            }
            let (l0, p0, _) = site3(&self.tensors[k - 1]);
            let data = gemm(l0 * p0, l, keep, self.tensors[k - 1].data(), &us);
            self.tensors[k - 1] = ComplexTensor::new(vec![l0, p0, keep], data)?;
            self.center = k - 1;
            let rec = TruncationRecord {
                iteration,
                bond: k - 1,
                discarded_weight: out.discarded_weight,
                discarded_sum: out.discarded_values.iter().sum(),
                bond_dim: keep,
            };
            rep.discarded_weight += rec.discarded_weight;
            rep.discarded_sum += rec.discarded_sum;
            rep.max_bond = rep.max_bond.max(keep);
            log.push(rec);
        }
        Ok(rep)
    }

    /// Born probabilities of factor `f` of site `pos` (center moved there).
    pub fn factor_probabilities(&mut self, pos: usize, f: usize) -> Result<Vec<f64>> {
        self.move_center(pos)?;
        let (a, d, b) = self.leg_view(pos, f);
        let data = self.tensors[pos].data();
        let mut p = vec![0.0; d];
        for x in 0..a {
            for (o, po) in p.iter_mut().enumerate() {
                let s = (x * d + o) * b;
                *po += data[s..s + b].iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        let tot: f64 = p.iter().sum();
        if tot.is_nan() || tot <= 0.0 {
            return Err(Error::ZeroNorm(format!("all outcomes of site {pos} factor {f} vanish")));
        }
        p.iter_mut().for_each(|x| *x /= tot);
        Ok(p)
    }

    /// `(left extent incl. bond, factor dim, right extent incl. bond)` of the
    /// site tensor viewed around factor `f`.
    fn leg_view(&self, pos: usize, f: usize) -> (usize, usize, usize) {
        let (l, _, r) = site3(&self.tensors[pos]);
        let fs = &self.factors[pos];
        let before: usize = fs[..f].iter().product();
        let after: usize = fs[f + 1..].iter().product();
        (l * before, fs[f], after * r)
    }

    /// Conditions factor `f` of site `pos` on `outcome`, removes that factor
    /// and renormalizes. Returns the conditional probability; when it is
    /// zero the state is left untouched.
    pub fn project_factor(&mut self, pos: usize, f: usize, outcome: usize) -> Result<f64> {
        if f >= self.factors[pos].len() || outcome >= self.factors[pos][f] {
            return Err(Error::InvalidArgument(format!("outcome {outcome} for factor {f} of site {pos}")));
        }
        self.move_center(pos)?;
        let total = self.norm_sqr();
        let (a, d, b) = self.leg_view(pos, f);
        let src = self.tensors[pos].data();
        let mut out = Vec::with_capacity(a * b);
        for x in 0..a {
            let s = (x * d + outcome) * b;
            out.extend_from_slice(&src[s..s + b]);
        }
        let w: f64 = out.iter().map(|z| z.norm_sqr()).sum();
        let p = if total > 0.0 { w / total } else { 0.0 };
        if p <= 0.0 {
            return Ok(0.0);
        }
        let (l, _, r) = site3(&self.tensors[pos]);
        self.factors[pos].remove(f);
        let phys: usize = self.factors[pos].iter().product();
        let mut t = ComplexTensor::new(vec![l, phys, r], out)?;
        t.scale(C64::new(1.0 / w.sqrt(), 0.0));
        self.tensors[pos] = t;
        Ok(p)
    }

    /// Samples factor `f` of site `pos`, projects onto the outcome and
    /// removes the factor. Returns `(outcome, probability)`.
    pub fn measure_factor<R: Rng + ?Sized>(&mut self, pos: usize, f: usize, rng: &mut R) -> Result<(usize, f64)> {
        let p = self.factor_probabilities(pos, f)?;
        let o = sample_index(&p, rng);
        let prob = self.project_factor(pos, f, o)?;
        Ok((o, prob))
    }

    fn fuse_site(&mut self, pos: usize) {
        let d: usize = self.factors[pos].iter().product();
        self.factors[pos] = vec![d];
    }

    /// Measures the whole physical leg of `pos`.
    pub fn measure_site<R: Rng + ?Sized>(&mut self, pos: usize, rng: &mut R) -> Result<(usize, f64)> {
        self.fuse_site(pos);
        self.measure_factor(pos, 0, rng)
    }

    pub fn project_site(&mut self, pos: usize, outcome: usize) -> Result<f64> {
        self.fuse_site(pos);
        self.project_factor(pos, 0, outcome)
    }

    /// Schmidt values across the bond between sites `cut` and `cut + 1`,
    /// non-increasing and normalized.
    pub fn schmidt_spectrum(&mut self, cut: usize) -> Result<Vec<f64>> {
        if cut + 1 >= self.len() {
            return Err(Error::InvalidArgument(format!("cut {cut} outside chain of {}", self.len())));
        }
        self.move_center(cut)?;
        let (l, p, r) = site3(&self.tensors[cut]);
        let (_, s, _) = svd_sorted(mat_of(self.tensors[cut].data(), l * p, r))?;
        let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(s.into_iter().map(|x| x / n).collect())
    }

    /// Dense amplitudes, site 0 (and within a site, factor 0) most significant.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut acc: Vec<C64> = self.tensors[0].data().to_vec();
        let mut rows = self.tensors[0].shape()[1];
        let mut bond = self.tensors[0].shape()[2];
        for t in &self.tensors[1..] {
            let (l, p, r) = site3(t);
            debug_assert_eq!(l, bond);
            acc = gemm(rows, l, p * r, &acc, t.data());
            rows *= p;
            bond = r;
        }
        debug_assert_eq!(bond, 1);
        acc
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * p.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > 0.0 {
            last = i;
            acc += x;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Rényi entropy in bits of the squared Schmidt values. `alpha = 1` gives
/// von Neumann, `alpha = 0` the log of the rank above `1e-12` in weight.
pub fn renyi_bits(schmidt: &[f64], alpha: f64) -> f64 {
    let lam: Vec<f64> = schmidt.iter().map(|s| s * s).filter(|&l| l > 0.0).collect();
    if alpha == 0.0 {
        return (lam.iter().filter(|&&l| l > 1e-12).count().max(1) as f64).log2();
    }
    if (alpha - 1.0).abs() < 1e-12 {
        return lam.iter().map(|l| -l * l.log2()).sum();
    }
    lam.iter().map(|l| l.powf(alpha)).sum::<f64>().log2() / (1.0 - alpha)
}

/// Vector with a single unit amplitude.
pub fn basis_vector(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[index] = ONE;
    v
}
