//! Dense complex linear algebra over small composite Hilbert spaces.
//!
//! Subsystem 0 of every [`SpaceLayout`] is the transmon by convention. The
//! Kronecker product orders factors most-significant first, so the composite
//! basis index of `|i_0, i_1, ...>` is `sum_s i_s * prod_{t>s} d_t`.
//!
//! Vectorization is column stacking: `vec(rho)[d*j + i] = rho[(i, j)]`.
//! With this convention `vec(A X B) = (B^T (x) A) vec(X)`, and a unitary
//! channel `rho -> U rho U^dag` has superoperator `conj(U) (x) U`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Ordered subsystem dimensions of a composite space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpaceLayout {
    factors: Vec<usize>,
}

impl SpaceLayout {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|&d| d == 0) {
            return Err(Error::DimensionMismatch(format!(
                "layout factors must be nonempty and positive, got {factors:?}"
            )));
        }
        Ok(Self { factors })
    }

    /// A layout of `n` qubits.
    pub fn qubits(n: usize) -> Self {
        Self {
            factors: vec![2; n.max(1)],
        }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().product()
    }

    pub fn concat(&self, other: &SpaceLayout) -> SpaceLayout {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        SpaceLayout { factors }
    }

    pub fn select(&self, keep: &[usize]) -> Result<SpaceLayout> {
        let mut factors = Vec::with_capacity(keep.len());
        for &k in keep {
            factors.push(*self.factors.get(k).ok_or(Error::SubsystemOutOfRange {
                index: k,
                len: self.factors.len(),
            })?);
        }
        SpaceLayout::new(factors)
    }

    /// Stride of each subsystem in the composite index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.factors.len()];
        for s in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[s] = strides[s + 1] * self.factors[s + 1];
        }
        strides
    }

    /// Digits of a composite index, one per subsystem.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for s in (0..self.factors.len()).rev() {
            out[s] = index % self.factors[s];
            index /= self.factors[s];
        }
        out
    }

    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&d, &f)| acc * f + d)
    }
}

/// An operator on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    layout: SpaceLayout,
    data: CMatrix,
}

impl OperatorMatrix {
    pub fn new(layout: SpaceLayout, data: CMatrix) -> Result<Self> {
        let d = layout.total_dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, layout needs {d}x{d}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { layout, data })
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let d = layout.total_dim();
        Self {
            layout,
            data: CMatrix::identity(d, d),
        }
    }

    /// Single-factor operator, layout inferred from the matrix size.
    pub fn from_matrix(data: CMatrix) -> Result<Self> {
        let layout = SpaceLayout::new(vec![data.nrows()])?;
        Self::new(layout, data)
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermitian_deviation(&self.data) <= tol
    }

    pub fn adjoint(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            data: self.data.adjoint(),
        }
    }

    pub fn mul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.layout != other.layout {
            return Err(Error::DimensionMismatch("operator layouts differ".into()));
        }
        Ok(Self {
            layout: self.layout.clone(),
            data: &self.data * &other.data,
        })
    }
}

/// Kronecker product; the result's factors are `a`'s followed by `b`'s.
pub fn tensor_product(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    OperatorMatrix {
        layout: a.layout.concat(&b.layout),
        data: a.data.kronecker(&b.data),
    }
}

pub fn kron_all(mats: &[CMatrix]) -> CMatrix {
    mats.iter()
        .skip(1)
        .fold(mats[0].clone(), |acc, m| acc.kronecker(m))
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()) * cr(0.5);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// A validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: SpaceLayout,
    data: CMatrix,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(layout: SpaceLayout, data: CMatrix) -> Result<Self> {
        let rho = Self::new_unchecked(layout, data)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Only checks dimensions. Used for intermediate and unnormalized states.
    pub fn new_unchecked(layout: SpaceLayout, data: CMatrix) -> Result<Self> {
        let d = layout.total_dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {}x{}, layout needs {d}x{d}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { layout, data })
    }

    pub fn validate(&self) -> Result<()> {
        let herm = hermitian_deviation(&self.data);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = trace(&self.data);
        if (tr - cr(1.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min_ev = hermitian_eigenvalues(&self.data)[0];
        if min_ev < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_ev:.3e}"
            )));
        }
        Ok(())
    }

    pub fn from_pure(layout: SpaceLayout, psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi = psi / cr(norm);
        let data = &psi * psi.adjoint();
        Self::new_unchecked(layout, data)
    }

    /// Computational basis product state with one digit per subsystem.
    pub fn basis(layout: SpaceLayout, digits: &[usize]) -> Result<Self> {
        if digits.len() != layout.len() || digits.iter().zip(layout.factors()).any(|(d, f)| d >= f)
        {
            return Err(Error::DimensionMismatch(format!(
                "basis digits {digits:?} incompatible with {:?}",
                layout.factors()
            )));
        }
        let d = layout.total_dim();
        let idx = layout.index_of(digits);
        let mut data = CMatrix::zeros(d, d);
        data[(idx, idx)] = cr(1.0);
        Ok(Self { layout, data })
    }

    pub fn maximally_mixed(layout: SpaceLayout) -> Self {
        let d = layout.total_dim();
        Self {
            data: CMatrix::identity(d, d) * cr(1.0 / d as f64),
            layout,
        }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> C64 {
        trace(&self.data)
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.data * &self.data)).re
    }

    pub fn population(&self, index: usize) -> f64 {
        self.data[(index, index)].re
    }

    pub fn vectorize(&self) -> CVector {
        vectorize(&self.data)
    }

    pub fn from_vectorized(layout: SpaceLayout, v: &CVector) -> Result<Self> {
        Self::new_unchecked(layout, devectorize(v)?)
    }

    /// Hermitized copy with trace rescaled to one.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidState(format!("trace {tr} not positive")));
        }
        let h = (&self.data + self.data.adjoint()) * cr(0.5 / tr);
        Ok(Self {
            layout: self.layout.clone(),
            data: h,
        })
    }
}

/// Column stacking: `v[d*j + i] = m[(i, j)]`.
pub fn vectorize(m: &CMatrix) -> CVector {
    // nalgebra storage is column-major, which is exactly this ordering
    CVector::from_column_slice(m.as_slice())
}

pub fn devectorize(v: &CVector) -> Result<CMatrix> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || n == 0 {
        return Err(Error::NotPerfectSquare(n));
    }
    Ok(CMatrix::from_column_slice(d, d, v.as_slice()))
}

/// Partial trace keeping the listed subsystems, in the order given.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let (layout, data) = partial_trace_matrix(&rho.data, &rho.layout, keep)?;
    DensityMatrix::new_unchecked(layout, data)
}

pub fn partial_trace_matrix(
    m: &CMatrix,
    layout: &SpaceLayout,
    keep: &[usize],
) -> Result<(SpaceLayout, CMatrix)> {
    if keep.is_empty() {
        return Err(Error::DimensionMismatch(
            "partial trace must keep at least one subsystem".into(),
        ));
    }
    for (i, &k) in keep.iter().enumerate() {
        if k >= layout.len() {
            return Err(Error::SubsystemOutOfRange {
                index: k,
                len: layout.len(),
            });
        }
        if keep[..i].contains(&k) {
            return Err(Error::DimensionMismatch(format!(
                "subsystem {k} listed twice"
            )));
        }
    }
    let idx = SubsystemIndexer::new(layout, keep)?;
    let dk = idx.local_dim;
    let mut out = CMatrix::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..idx.rest_dim {
                acc += m[(idx.full(a, r), idx.full(b, r))];
            }
            out[(a, b)] = acc;
        }
    }
    Ok((layout.select(keep)?, out))
}

/// Maps composite indices to (local, rest) pairs for a subset of subsystems.
#[derive(Debug, Clone)]
pub struct SubsystemIndexer {
    pub local_dim: usize,
    pub rest_dim: usize,
    to_full: Vec<usize>,
}

impl SubsystemIndexer {
    pub fn new(layout: &SpaceLayout, local: &[usize]) -> Result<Self> {
        for &k in local {
            if k >= layout.len() {
                return Err(Error::SubsystemOutOfRange {
                    index: k,
                    len: layout.len(),
                });
            }
        }
        let rest: Vec<usize> = (0..layout.len()).filter(|s| !local.contains(s)).collect();
        let local_dims: Vec<usize> = local.iter().map(|&s| layout.factors()[s]).collect();
        let rest_dims: Vec<usize> = rest.iter().map(|&s| layout.factors()[s]).collect();
        let local_dim: usize = local_dims.iter().product();
        let rest_dim: usize = rest_dims.iter().product();
        let strides = layout.strides();
        let mut to_full = vec![0; local_dim * rest_dim];
        for l in 0..local_dim {
            let ld = mixed_digits(l, &local_dims);
            let base: usize = ld.iter().zip(local).map(|(d, &s)| d * strides[s]).sum();
            for r in 0..rest_dim {
                let rd = mixed_digits(r, &rest_dims);
                let off: usize = rd.iter().zip(&rest).map(|(d, &s)| d * strides[s]).sum();
                to_full[l * rest_dim + r] = base + off;
            }
        }
        Ok(Self {
            local_dim,
            rest_dim,
            to_full,
        })
    }

    #[inline]
    pub fn full(&self, local: usize, rest: usize) -> usize {
        self.to_full[local * self.rest_dim + rest]
    }
}

fn mixed_digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for s in (0..dims.len()).rev() {
        out[s] = index % dims[s];
        index /= dims[s];
    }
    out
}

/// `rho -> U rho U^dag` with `U` acting on the indexed subsystems.
pub fn apply_local_unitary(rho: &CMatrix, u: &CMatrix, idx: &SubsystemIndexer) -> CMatrix {
    let dl = idx.local_dim;
    let dr = idx.rest_dim;
    let n = rho.nrows();
    // left multiply
    let mut tmp = CMatrix::zeros(n, n);
    for col in 0..n {
        for r in 0..dr {
            for a in 0..dl {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..dl {
                    let ub = u[(a, b)];
                    if ub != C64::new(0.0, 0.0) {
                        acc += ub * rho[(idx.full(b, r), col)];
                    }
                }
                tmp[(idx.full(a, r), col)] = acc;
            }
        }
    }
    // right multiply by U^dag
    let mut out = CMatrix::zeros(n, n);
    for row in 0..n {
        for r in 0..dr {
            for a in 0..dl {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..dl {
                    let ub = u[(a, b)];
                    if ub != C64::new(0.0, 0.0) {
                        acc += tmp[(row, idx.full(b, r))] * ub.conj();
                    }
                }
                out[(row, idx.full(a, r))] = acc;
            }
        }
    }
    out
}

/// Applies a local superoperator (column-stacked on the local factor) to the
/// indexed subsystems of `rho`, leaving the rest untouched.
pub fn apply_local_superop(rho: &CMatrix, s: &CMatrix, idx: &SubsystemIndexer) -> CMatrix {
    let dl = idx.local_dim;
    let dr = idx.rest_dim;
    let n = rho.nrows();
    let mut out = CMatrix::zeros(n, n);
    let mut block = vec![C64::new(0.0, 0.0); dl * dl];
    for r1 in 0..dr {
        for r2 in 0..dr {
            // local block for this pair of rest indices, column-stacked
            for j in 0..dl {
                for i in 0..dl {
                    block[dl * j + i] = rho[(idx.full(i, r1), idx.full(j, r2))];
                }
            }
            if block.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            for j in 0..dl {
                for i in 0..dl {
                    let row = dl * j + i;
                    let mut acc = C64::new(0.0, 0.0);
                    for (k, bk) in block.iter().enumerate() {
                        acc += s[(row, k)] * bk;
                    }
                    out[(idx.full(i, r1), idx.full(j, r2))] = acc;
                }
            }
        }
    }
    out
}

/// A linear map on column-stacked density matrices of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    data: CMatrix,
}

impl SuperOperator {
    pub fn new(data: CMatrix) -> Result<Self> {
        let n = data.nrows();
        let dim = (n as f64).sqrt().round() as usize;
        if data.ncols() != n || dim * dim != n {
            return Err(Error::DimensionMismatch(format!(
                "superoperator must be d^2 x d^2, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            data: CMatrix::identity(dim * dim, dim * dim),
        }
    }

    /// Superoperator of `rho -> U rho U^dag`.
    pub fn from_unitary(u: &CMatrix) -> Self {
        Self {
            dim: u.nrows(),
            data: u.conjugate().kronecker(u),
        }
    }

    /// Superoperator of `rho -> sum_k K_k rho K_k^dag`.
    pub fn from_kraus(ops: &[CMatrix]) -> Result<Self> {
        let d = ops
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty Kraus set".into()))?
            .nrows();
        let mut data = CMatrix::zeros(d * d, d * d);
        for k in ops {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::DimensionMismatch("Kraus sizes differ".into()));
            }
            data += k.conjugate().kronecker(k);
        }
        Ok(Self { dim: d, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn apply_matrix(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "superoperator acts on dimension {}, state has {}",
                self.dim,
                rho.nrows()
            )));
        }
        devectorize(&(&self.data * vectorize(rho)))
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &SuperOperator) -> Result<SuperOperator> {
        if self.dim != first.dim {
            return Err(Error::DimensionMismatch("superoperator dims differ".into()));
        }
        Ok(Self {
            dim: self.dim,
            data: &self.data * &first.data,
        })
    }

    /// Checks that Hermitian probes stay Hermitian.
    pub fn preserves_hermiticity(&self, tol: f64) -> bool {
        let d = self.dim;
        for i in 0..d {
            for j in i..d {
                let mut probe = CMatrix::zeros(d, d);
                if i == j {
                    probe[(i, i)] = cr(1.0);
                } else {
                    probe[(i, j)] = cr(1.0);
                    probe[(j, i)] = cr(1.0);
                }
                let out = self.apply_matrix(&probe).expect("dims checked");
                if hermitian_deviation(&out) > tol {
                    return false;
                }
                if i != j {
                    let mut probe = CMatrix::zeros(d, d);
                    probe[(i, j)] = c(0.0, 1.0);
                    probe[(j, i)] = c(0.0, -1.0);
                    let out = self.apply_matrix(&probe).expect("dims checked");
                    if hermitian_deviation(&out) > tol {
                        return false;
                    }
                }
            }
        }
        true
    }
}

pub fn apply_superop(e: &SuperOperator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let out = e.apply_matrix(rho.matrix())?;
    DensityMatrix::new_unchecked(rho.layout().clone(), out)
}

pub mod pauli {
    use super::*;

    pub fn identity() -> CMatrix {
        CMatrix::identity(2, 2)
    }

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
    }

    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
    }

    /// `{I, X, Y, Z}` indexed 0..4.
    pub fn by_index(k: usize) -> CMatrix {
        match k {
            0 => identity(),
            1 => x(),
            2 => y(),
            3 => z(),
            _ => panic!("pauli index {k} out of range"),
        }
    }

    /// n-qubit Pauli string for a base-4 label, first factor most significant.
    pub fn string(label: usize, n: usize) -> CMatrix {
        let digits: Vec<usize> = (0..n).rev().map(|q| (label / 4usize.pow(q as u32)) % 4).collect();
        let mats: Vec<CMatrix> = digits.into_iter().map(by_index).collect();
        kron_all(&mats)
    }
}
