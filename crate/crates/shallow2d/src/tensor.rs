//! Dense complex tensors, truncated SVD, QR and Haar-random unitaries.
//!
//! Storage is row-major: the last axis varies fastest. Every reshape in the
//! crate is a reinterpretation of that order, never a copy with reordering.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl ComplexTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let size: usize = shape.iter().product();
        if size != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} holds {} entries but {} were given",
                shape,
                size,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let size = shape.iter().product();
        Self { shape, data: vec![ZERO; size] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(vec![dim, dim]);
        for i in 0..dim {
            t.data[i * dim + i] = ONE;
        }
        t
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let size: usize = shape.iter().product();
        let mut data = Vec::with_capacity(size);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..size {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape, data }
    }

    /// Row-major matrix from rows.
    pub fn matrix(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: C64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let size: usize = shape.iter().product();
        if size != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Axis permutation: output axis `k` is input axis `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if perm.len() != r {
            return Err(Error::Shape(format!("permutation {perm:?} for rank {r}")));
        }
        for &p in perm {
            if p >= r || seen[p] {
                return Err(Error::Shape(format!("invalid permutation {perm:?}")));
            }
            seen[p] = true;
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let old_strides = self.strides();
        let src_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; r];
        let mut off = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[off]);
            for ax in (0..r).rev() {
                idx[ax] += 1;
                off += src_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                off -= src_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self { shape: new_shape, data })
    }

    pub fn conj(&self) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&mut self, a: C64) {
        self.data.iter_mut().for_each(|z| *z *= a);
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Conjugate transpose of a matrix.
    pub fn adjoint(&self) -> Result<Self> {
        let (r, c) = self.dims2()?;
        let mut out = Self::zeros(vec![c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j].conj();
            }
        }
        Ok(out)
    }

    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::Shape(format!("expected a matrix, got shape {s:?}"))),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        contract(self, &[1], other, &[0])
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_dmatrix(&self) -> Result<DMatrix<C64>> {
        let (r, c) = self.dims2()?;
        Ok(DMatrix::from_row_slice(r, c, &self.data))
    }

    pub fn from_dmatrix(m: &DMatrix<C64>) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self { shape: vec![r, c], data }
    }

    /// Kronecker product of two matrices; `self` acts on the more significant factor.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let (ar, ac) = self.dims2()?;
        let (br, bc) = other.dims2()?;
        let mut out = Self::zeros(vec![ar * br, ac * bc]);
        let oc = ac * bc;
        for i in 0..ar {
            for j in 0..ac {
                let a = self.data[i * ac + j];
                for k in 0..br {
                    for l in 0..bc {
                        out.data[(i * br + k) * oc + j * bc + l] = a * other.data[k * bc + l];
                    }
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for ax in (0..shape.len().saturating_sub(1)).rev() {
        s[ax] = s[ax + 1] * shape[ax + 1];
    }
    s
}

/// Contracts `axes_a` of `a` with `axes_b` of `b` pairwise. The result keeps
/// the free axes of `a` in their original order, followed by those of `b`.
pub fn contract(
    a: &ComplexTensor,
    axes_a: &[usize],
    b: &ComplexTensor,
    axes_b: &[usize],
) -> Result<ComplexTensor> {
    if axes_a.len() != axes_b.len() {
        return Err(Error::Shape("contracted axis lists differ in length".into()));
    }
    for (&x, &y) in axes_a.iter().zip(axes_b) {
        if x >= a.rank() || y >= b.rank() {
            return Err(Error::Shape(format!("axis out of range: ({x}, {y})")));
        }
        if a.shape[x] != b.shape[y] {
            return Err(Error::Shape(format!(
                "extent mismatch on contracted axes {x}/{y}: {} vs {}",
                a.shape[x], b.shape[y]
            )));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|i| !axes_a.contains(i)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|i| !axes_b.contains(i)).collect();
    let perm_a: Vec<usize> = free_a.iter().chain(axes_a).copied().collect();
    let perm_b: Vec<usize> = axes_b.iter().chain(&free_b).copied().collect();
    let pa = a.permute(&perm_a)?;
    let pb = b.permute(&perm_b)?;
    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = axes_a.iter().map(|&i| a.shape[i]).product();
    let n: usize = free_b.iter().map(|&i| b.shape[i]).product();
    let data = gemm(m, k, n, &pa.data, &pb.data);
    let shape = free_a
        .iter()
        .map(|&i| a.shape[i])
        .chain(free_b.iter().map(|&i| b.shape[i]))
        .collect();
    Ok(ComplexTensor { shape, data })
}

/// Row-major `m×k` times `k×n`.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let x = a[i * k + p];
            if x == ZERO {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, y) in row.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    out
}

/// Applies `op` to the factors `targets` of `data`, viewed as a row-major
/// tensor with extents `dims`. `op` is a `K x K` row-major matrix where `K` is
/// the product of the target extents, with `targets[0]` the most significant
/// part of its index. Targets may appear in any order but must be distinct.
pub fn apply_local(data: &mut [C64], dims: &[usize], targets: &[usize], op: &[C64]) {
    let strides = strides_of(dims);
    let k: usize = targets.iter().map(|&t| dims[t]).product();
    debug_assert_eq!(op.len(), k * k);
    debug_assert_eq!(data.len(), dims.iter().product::<usize>());
    let mut offs = vec![0usize; k];
    for (idx, off) in offs.iter_mut().enumerate() {
        let mut rem = idx;
        for &t in targets.iter().rev() {
            *off += (rem % dims[t]) * strides[t];
            rem /= dims[t];
        }
    }
    let others: Vec<usize> = (0..dims.len()).filter(|a| !targets.contains(a)).collect();
    let n_base: usize = others.iter().map(|&a| dims[a]).product();
    let mut counter = vec![0usize; others.len()];
    let mut base = 0usize;
    let mut buf = vec![ZERO; k];
    for _ in 0..n_base {
        for (b, &o) in buf.iter_mut().zip(&offs) {
            *b = data[base + o];
        }
        for (row, &o) in offs.iter().enumerate() {
            let r = &op[row * k..(row + 1) * k];
            let mut acc = ZERO;
            for (x, y) in r.iter().zip(&buf) {
                acc += x * y;
            }
            data[base + o] = acc;
        }
        for pos in (0..others.len()).rev() {
            let ax = others[pos];
            counter[pos] += 1;
            base += strides[ax];
            if counter[pos] < dims[ax] {
                break;
            }
            base -= strides[ax] * dims[ax];
            counter[pos] = 0;
        }
    }
}

/// Swaps the two tensor factors of a gate on `d1 x d2`, giving the same
/// operator on `d2 x d1`.
pub fn swap_gate_factors(op: &ComplexTensor, d1: usize, d2: usize) -> Result<ComplexTensor> {
    op.clone()
        .reshape(vec![d1, d2, d1, d2])?
        .permute(&[1, 0, 3, 2])?
        .reshape(vec![d1 * d2, d1 * d2])
}

#[derive(Clone, Debug)]
pub struct SvdOutcome {
    /// `m × k` with orthonormal columns.
    pub left_isometry: ComplexTensor,
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    /// `k × n` with orthonormal rows (this is `V†`).
    pub right_isometry: ComplexTensor,
    /// Sum of squares of the dropped singular values.
    pub discarded_weight: f64,
    /// The dropped singular values themselves, largest first.
    pub discarded_values: Vec<f64>,
}

/// Relative tolerance under which two singular values count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Number of leading singular values to keep so that the squared tail is
/// within `budget`, extended over any values degenerate with the last kept
/// one. At least one value is kept when any exist.
pub fn keep_count(values: &[f64], budget: f64) -> usize {
    if values.is_empty() {
        return 0;
    }
    let mut keep = values.len();
    let mut tail = 0.0;
    while keep > 1 {
        let next = tail + values[keep - 1] * values[keep - 1];
        if next <= budget {
            tail = next;
            keep -= 1;
        } else {
            break;
        }
    }
    let scale = values[0].max(f64::MIN_POSITIVE);
    while keep < values.len() && (values[keep - 1] - values[keep]).abs() <= DEGENERACY_TOL * scale {
        keep += 1;
    }
    keep
}

/// Thin SVD of a matrix with truncation. First drops the longest tail of
/// singular values whose squared sum fits in `weight_budget`, then cuts to
/// `max_rank` if the result is still larger.
pub fn svd_truncate(
    m: &ComplexTensor,
    max_rank: Option<usize>,
    weight_budget: f64,
) -> Result<SvdOutcome> {
    let dm = m.to_dmatrix()?;
    let (u, s, vt) = svd_sorted(dm)?;
    Ok(truncate_factors(&u, &s, &vt, max_rank, weight_budget))
}

pub(crate) fn truncate_factors(
    u: &DMatrix<C64>,
    s: &[f64],
    vt: &DMatrix<C64>,
    max_rank: Option<usize>,
    weight_budget: f64,
) -> SvdOutcome {
    let mut keep = keep_count(s, weight_budget);
    if let Some(r) = max_rank {
        keep = keep.min(r.max(1));
    }
    let discarded_values: Vec<f64> = s[keep..].to_vec();
    let discarded_weight = discarded_values.iter().map(|x| x * x).sum();
    let left = ComplexTensor::from_dmatrix(&u.columns(0, keep).into_owned());
    let right = ComplexTensor::from_dmatrix(&vt.rows(0, keep).into_owned());
    SvdOutcome {
        left_isometry: left,
        singular_values: s[..keep].to_vec(),
        right_isometry: right,
        discarded_weight,
        discarded_values,
    }
}

/// Full thin SVD with singular values sorted non-increasing (stable on ties).
/// Computed with faer: nalgebra's complex SVD returns inaccurate factors on
/// some rank-deficient inputs.
pub(crate) fn svd_sorted(m: DMatrix<C64>) -> Result<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok((DMatrix::zeros(r, 0), vec![], DMatrix::zeros(0, c)));
    }
    let fm = faer::Mat::<C64>::from_fn(r, c, |i, j| m[(i, j)]);
    let svd = fm.thin_svd().map_err(|_| Error::SvdNoConvergence(format!("{r}x{c} matrix")))?;
    let (u, v) = (svd.U(), svd.V());
    let sd = svd.S().column_vector();
    let k = sd.nrows();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sd[b].re.total_cmp(&sd[a].re).then(a.cmp(&b)));
    let mut u2 = DMatrix::zeros(r, k);
    let mut vt2 = DMatrix::zeros(k, c);
    let mut s2 = Vec::with_capacity(k);
    for (new, &old) in order.iter().enumerate() {
        for i in 0..r {
            u2[(i, new)] = u[(i, old)];
        }
        for j in 0..c {
            vt2[(new, j)] = v[(j, old)].conj();
        }
        s2.push(sd[old].re);
    }
    Ok((u2, s2, vt2))
}

/// Thin QR of a matrix: `m = q r` with `q` having orthonormal columns.
pub fn qr(m: &ComplexTensor) -> Result<(ComplexTensor, ComplexTensor)> {
    let (q, r) = qr_dm(m.to_dmatrix()?);
    Ok((ComplexTensor::from_dmatrix(&q), ComplexTensor::from_dmatrix(&r)))
}

pub(crate) fn qr_dm(m: DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let qr = m.qr();
    (qr.q(), qr.r())
}

/// Haar-random `dim × dim` unitary: QR of a complex Ginibre matrix, with each
/// column of Q multiplied by the phase of the matching diagonal entry of R.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexTensor {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let (mut q, r) = qr_dm(g);
    for j in 0..dim {
        let d = r[(j, j)];
        let n = d.norm();
        let phase = if n > 0.0 { d / n } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    ComplexTensor::from_dmatrix(&q)
}

/// Largest entry of `|U†U − I|`.
pub fn unitarity_defect(u: &ComplexTensor) -> f64 {
    let ud = u.adjoint().expect("matrix");
    let p = ud.matmul(u).expect("square");
    let n = p.shape()[0];
    p.max_abs_diff(&ComplexTensor::identity(n))
}
