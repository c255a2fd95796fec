//! Truncated multi-mode Fock spaces, state vectors, density operators and
//! mode operators.
//!
//! Basis ordering is lexicographic in the occupation tuple `(n_1, ..., n_M)`
//! with mode 1 varying slowest, so the flat index of `(n_1, ..., n_M)` is
//! `sum_m n_m * stride_m` with `stride_M = 1` and
//! `stride_m = stride_{m+1} * (cutoff_{m+1} + 1)`. Every other module goes
//! through [`FockSpace::index`] / [`FockSpace::occupation`] rather than
//! recomputing offsets.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Product of per-mode truncated Fock spaces. Each cutoff is the largest
/// photon number kept in that mode (inclusive).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FockSpace {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    dimension: usize,
}

impl FockSpace {
    pub fn new(cutoffs: Vec<usize>) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::EmptyModeSet);
        }
        let mut strides = vec![1; cutoffs.len()];
        for m in (0..cutoffs.len() - 1).rev() {
            strides[m] = strides[m + 1] * (cutoffs[m + 1] + 1);
        }
        let dimension = strides[0] * (cutoffs[0] + 1);
        Ok(Self {
            cutoffs,
            strides,
            dimension,
        })
    }

    pub fn single(cutoff: usize) -> Self {
        Self::new(vec![cutoff]).expect("one mode")
    }

    pub fn uniform(modes: usize, cutoff: usize) -> Result<Self> {
        Self::new(vec![cutoff; modes])
    }

    pub fn mode_count(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoff(&self, mode: usize) -> usize {
        self.cutoffs[mode]
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.mode_count() {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange {
                mode,
                modes: self.mode_count(),
            })
        }
    }

    /// Flat index of an occupation tuple. Panics if an occupation exceeds its cutoff.
    pub fn index(&self, occupation: &[usize]) -> usize {
        assert_eq!(occupation.len(), self.mode_count());
        occupation
            .iter()
            .zip(&self.cutoffs)
            .zip(&self.strides)
            .map(|((&n, &c), &s)| {
                assert!(n <= c, "occupation {n} above cutoff {c}");
                n * s
            })
            .sum()
    }

    pub fn occupation(&self, index: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.cutoffs)
            .map(|(&s, &c)| (index / s) % (c + 1))
            .collect()
    }

    /// Photon number of `mode` at every basis index, in basis order.
    pub fn occupation_table(&self, mode: usize) -> Vec<usize> {
        let s = self.strides[mode];
        let c = self.cutoffs[mode];
        (0..self.dimension).map(|i| (i / s) % (c + 1)).collect()
    }

    /// Total photon number over `modes` at every basis index.
    pub fn total_number_table(&self, modes: &[usize]) -> Vec<usize> {
        let mut total = vec![0; self.dimension];
        for &m in modes {
            for (t, n) in total.iter_mut().zip(self.occupation_table(m)) {
                *t += n;
            }
        }
        total
    }

    pub fn concat(&self, other: &FockSpace) -> FockSpace {
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.extend_from_slice(&other.cutoffs);
        FockSpace::new(cutoffs).expect("non-empty")
    }

    pub fn subspace(&self, modes: &[usize]) -> Result<FockSpace> {
        for &m in modes {
            self.check_mode(m)?;
        }
        FockSpace::new(modes.iter().map(|&m| self.cutoffs[m]).collect())
    }
}

/// Pure state amplitudes over a truncated Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    space: FockSpace,
    amplitudes: DVector<Complex64>,
}

impl FockVector {
    pub fn new(space: FockSpace, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dimension() {
            return Err(Error::SizeMismatch {
                expected: space.dimension(),
                actual: amplitudes.len(),
            });
        }
        Ok(Self { space, amplitudes })
    }

    pub fn from_vec(space: FockSpace, amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::new(space, DVector::from_vec(amplitudes))
    }

    pub fn zeros(space: FockSpace) -> Self {
        let amplitudes = DVector::zeros(space.dimension());
        Self { space, amplitudes }
    }

    pub fn basis(space: FockSpace, occupation: &[usize]) -> Self {
        let mut v = Self::zeros(space);
        let i = v.space.index(occupation);
        v.amplitudes[i] = ONE;
        v
    }

    pub fn vacuum(space: FockSpace) -> Self {
        let occ = vec![0; space.mode_count()];
        Self::basis(space, &occ)
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupation: &[usize]) -> Complex64 {
        self.amplitudes[self.space.index(occupation)]
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// Probability mass missing from the truncated amplitudes, `1 - |psi|^2`.
    pub fn truncation_deficit(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    pub fn normalized(&self) -> FockVector {
        let n = self.norm_sqr().sqrt();
        FockVector {
            space: self.space.clone(),
            amplitudes: self.amplitudes.unscale(n),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> FockVector {
        FockVector {
            space: self.space.clone(),
            amplitudes: self.amplitudes.map(|a| a * factor),
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockVector) -> Result<Complex64> {
        self.check_same_space(other.space())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn expectation(&self, op: &ModeOperator) -> Result<Complex64> {
        let applied = op.apply(self)?;
        self.inner(&applied)
    }

    pub fn projector(&self) -> DensityOperator {
        DensityOperator {
            space: self.space.clone(),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    pub fn max_abs_diff(&self, other: &FockVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn check_same_space(&self, space: &FockSpace) -> Result<()> {
        if &self.space != space {
            return Err(Error::SizeMismatch {
                expected: self.space.dimension(),
                actual: space.dimension(),
            });
        }
        Ok(())
    }
}

/// Kronecker product `|v1> (x) |v2>` on the concatenated space; the modes of
/// `v1` come first (slowest).
pub fn tensor(v1: &FockVector, v2: &FockVector) -> FockVector {
    let space = v1.space.concat(&v2.space);
    let d2 = v2.amplitudes.len();
    let mut amps = DVector::zeros(space.dimension());
    for (i, a) in v1.amplitudes.iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        for (j, b) in v2.amplitudes.iter().enumerate() {
            amps[i * d2 + j] = a * b;
        }
    }
    FockVector {
        space,
        amplitudes: amps,
    }
}

/// Hermitian positive semidefinite matrix on a truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    space: FockSpace,
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn new(space: FockSpace, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = space.dimension();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::SizeMismatch {
                expected: d,
                actual: matrix.nrows(),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn from_pure(psi: &FockVector) -> Self {
        psi.projector()
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.matrix.norm_squared()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = match crate::linalg::hermitian_eigen(&self.matrix) {
            Ok((values, _)) => values.iter().copied().collect(),
            Err(_) => vec![f64::NAN; self.matrix.nrows()],
        };
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn expectation(&self, op: &ModeOperator) -> Result<Complex64> {
        let m = op.to_dense();
        if m.nrows() != self.matrix.nrows() {
            return Err(Error::SizeMismatch {
                expected: self.matrix.nrows(),
                actual: m.nrows(),
            });
        }
        Ok((m * &self.matrix).trace())
    }

    /// Diagonal of the matrix in the Fock basis (photon-number statistics).
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn max_abs_diff(&self, other: &DensityOperator) -> f64 {
        max_abs_diff(&self.matrix, &other.matrix)
    }

    /// Checks Hermiticity (1e-12), trace (`trace_tol`) and eigenvalues (>= -1e-10).
    pub fn validate(&self, trace_tol: f64) -> Result<()> {
        let h = self.hermiticity_deviation();
        if h > 1e-12 {
            return Err(Error::NonHermitian { deviation: h });
        }
        let t = self.trace();
        if (t - 1.0).abs() > trace_tol {
            return Err(Error::TraceViolation {
                trace: t,
                tolerance: trace_tol,
            });
        }
        if let Some(&min) = self.eigenvalues().first() {
            if min < -1e-10 {
                return Err(Error::Spectral(format!("negative eigenvalue {min:.3e}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Partial trace keeping `keep` (in the order given, which must be ascending).
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    if keep.is_empty() {
        return Err(Error::EmptyModeSet);
    }
    let space = rho.space();
    for &m in keep {
        space.check_mode(m)?;
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("partial_trace: keep must be strictly ascending".into()));
    }
    let traced: Vec<usize> = (0..space.mode_count()).filter(|m| !keep.contains(m)).collect();
    let kept_space = space.subspace(keep)?;
    let traced_space = if traced.is_empty() {
        None
    } else {
        Some(space.subspace(&traced)?)
    };

    let dk = kept_space.dimension();
    let dt = traced_space.as_ref().map_or(1, FockSpace::dimension);
    // full index of (kept index, traced index)
    let full_index = |ik: usize, it: usize| -> usize {
        let occ_k = kept_space.occupation(ik);
        let occ_t = traced_space
            .as_ref()
            .map(|s| s.occupation(it))
            .unwrap_or_default();
        let mut occ = vec![0; space.mode_count()];
        for (pos, &m) in keep.iter().enumerate() {
            occ[m] = occ_k[pos];
        }
        for (pos, &m) in traced.iter().enumerate() {
            occ[m] = occ_t[pos];
        }
        space.index(&occ)
    };
    let table: Vec<Vec<usize>> = (0..dk)
        .map(|ik| (0..dt).map(|it| full_index(ik, it)).collect())
        .collect();
    let m = rho.matrix();
    let reduced = DMatrix::from_fn(dk, dk, |i, j| {
        table[i]
            .iter()
            .zip(&table[j])
            .map(|(&a, &b)| m[(a, b)])
            .sum::<Complex64>()
    });
    DensityOperator::new(kept_space, reduced)
}

/// A diagonal, sparse, block-diagonal or dense operator on a Fock space.
#[derive(Clone, Debug)]
pub enum OperatorRepr {
    Dense(DMatrix<Complex64>),
    Diagonal(DVector<Complex64>),
    /// Coordinate list of `(row, column, value)`.
    Sparse(Vec<(usize, usize, Complex64)>),
    /// Disjoint index blocks covering every basis index.
    Blocks(Vec<OperatorBlock>),
}

#[derive(Clone, Debug)]
pub struct OperatorBlock {
    pub indices: Vec<usize>,
    pub matrix: Arc<DMatrix<Complex64>>,
}

#[derive(Clone, Debug)]
pub struct ModeOperator {
    space: FockSpace,
    repr: OperatorRepr,
    unitary: bool,
}

impl ModeOperator {
    pub fn new(space: FockSpace, repr: OperatorRepr, unitary: bool) -> Result<Self> {
        let d = space.dimension();
        let ok = match &repr {
            OperatorRepr::Dense(m) => m.nrows() == d && m.ncols() == d,
            OperatorRepr::Diagonal(v) => v.len() == d,
            OperatorRepr::Sparse(entries) => entries.iter().all(|&(i, j, _)| i < d && j < d),
            OperatorRepr::Blocks(blocks) => {
                blocks.iter().map(|b| b.indices.len()).sum::<usize>() == d
                    && blocks.iter().all(|b| {
                        b.matrix.nrows() == b.indices.len() && b.matrix.ncols() == b.indices.len()
                    })
            }
        };
        if !ok {
            return Err(Error::SizeMismatch {
                expected: d,
                actual: 0,
            });
        }
        Ok(Self {
            space,
            repr,
            unitary,
        })
    }

    pub fn identity(space: FockSpace) -> Self {
        let d = space.dimension();
        Self {
            space,
            repr: OperatorRepr::Diagonal(DVector::from_element(d, ONE)),
            unitary: true,
        }
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn repr(&self) -> &OperatorRepr {
        &self.repr
    }

    /// Whether the operator was constructed as a unitary.
    pub fn unitary_flag(&self) -> bool {
        self.unitary
    }

    /// Diagonal entries if the operator is stored diagonally.
    pub fn as_diagonal(&self) -> Option<&DVector<Complex64>> {
        match &self.repr {
            OperatorRepr::Diagonal(v) => Some(v),
            _ => None,
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let d = self.space.dimension();
        match &self.repr {
            OperatorRepr::Dense(m) => m.clone(),
            OperatorRepr::Diagonal(v) => DMatrix::from_diagonal(v),
            OperatorRepr::Sparse(entries) => {
                let mut m = DMatrix::zeros(d, d);
                for &(i, j, z) in entries {
                    m[(i, j)] += z;
                }
                m
            }
            OperatorRepr::Blocks(blocks) => {
                let mut m = DMatrix::zeros(d, d);
                for b in blocks {
                    for (bi, &i) in b.indices.iter().enumerate() {
                        for (bj, &j) in b.indices.iter().enumerate() {
                            m[(i, j)] = b.matrix[(bi, bj)];
                        }
                    }
                }
                m
            }
        }
    }

    pub fn apply_amplitudes(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        match &self.repr {
            OperatorRepr::Dense(m) => m * x,
            OperatorRepr::Diagonal(v) => v.component_mul(x),
            OperatorRepr::Sparse(entries) => {
                let mut y = DVector::zeros(x.len());
                for &(i, j, z) in entries {
                    y[i] += z * x[j];
                }
                y
            }
            OperatorRepr::Blocks(blocks) => {
                let mut y = DVector::zeros(x.len());
                let mut local = Vec::new();
                for b in blocks {
                    local.clear();
                    local.extend(b.indices.iter().map(|&i| x[i]));
                    if local.iter().all(|z| *z == ZERO) {
                        continue;
                    }
                    for (bi, &i) in b.indices.iter().enumerate() {
                        let mut acc = ZERO;
                        for (bj, z) in local.iter().enumerate() {
                            acc += b.matrix[(bi, bj)] * z;
                        }
                        y[i] = acc;
                    }
                }
                y
            }
        }
    }

    pub fn apply(&self, psi: &FockVector) -> Result<FockVector> {
        if psi.space() != &self.space {
            return Err(Error::SizeMismatch {
                expected: self.space.dimension(),
                actual: psi.space().dimension(),
            });
        }
        Ok(FockVector {
            space: self.space.clone(),
            amplitudes: self.apply_amplitudes(psi.amplitudes()),
        })
    }

    pub fn adjoint(&self) -> ModeOperator {
        let repr = match &self.repr {
            OperatorRepr::Dense(m) => OperatorRepr::Dense(m.adjoint()),
            OperatorRepr::Diagonal(v) => OperatorRepr::Diagonal(v.map(|z| z.conj())),
            OperatorRepr::Sparse(entries) => {
                OperatorRepr::Sparse(entries.iter().map(|&(i, j, z)| (j, i, z.conj())).collect())
            }
            OperatorRepr::Blocks(blocks) => OperatorRepr::Blocks(
                blocks
                    .iter()
                    .map(|b| OperatorBlock {
                        indices: b.indices.clone(),
                        matrix: Arc::new(b.matrix.adjoint()),
                    })
                    .collect(),
            ),
        };
        ModeOperator {
            space: self.space.clone(),
            repr,
            unitary: self.unitary,
        }
    }

    /// `self * other` as an operator (dense unless both are diagonal).
    pub fn compose(&self, other: &ModeOperator) -> Result<ModeOperator> {
        if self.space != other.space {
            return Err(Error::SizeMismatch {
                expected: self.space.dimension(),
                actual: other.space.dimension(),
            });
        }
        let unitary = self.unitary && other.unitary;
        let repr = match (&self.repr, &other.repr) {
            (OperatorRepr::Diagonal(a), OperatorRepr::Diagonal(b)) => {
                OperatorRepr::Diagonal(a.component_mul(b))
            }
            _ => OperatorRepr::Dense(self.to_dense() * other.to_dense()),
        };
        Ok(ModeOperator {
            space: self.space.clone(),
            repr,
            unitary,
        })
    }

    /// `U rho U^dagger`.
    pub fn conjugate(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.space() != &self.space {
            return Err(Error::SizeMismatch {
                expected: self.space.dimension(),
                actual: rho.space().dimension(),
            });
        }
        let u = self.to_dense();
        DensityOperator::new(self.space.clone(), &u * rho.matrix() * u.adjoint())
    }

    /// Max-norm deviation of `U^dagger U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        match &self.repr {
            OperatorRepr::Diagonal(v) => v.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max),
            OperatorRepr::Blocks(blocks) => blocks
                .iter()
                .map(|b| {
                    let p = b.matrix.adjoint() * b.matrix.as_ref();
                    identity_deviation(&p)
                })
                .fold(0.0, f64::max),
            _ => {
                let m = self.to_dense();
                identity_deviation(&(m.adjoint() * &m))
            }
        }
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        match &self.repr {
            OperatorRepr::Diagonal(v) => v.iter().map(|z| z.im.abs()).fold(0.0, f64::max),
            _ => {
                let m = self.to_dense();
                max_abs_diff(&m, &m.adjoint())
            }
        }
    }
}

fn identity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { ONE } else { ZERO };
            dev = dev.max((m[(i, j)] - target).norm());
        }
    }
    dev
}

/// Annihilation operator of `mode`: `<n-1|a|n> = sqrt(n)`, identity on the other modes.
pub fn annihilation_op(space: &FockSpace, mode: usize) -> Result<ModeOperator> {
    space.check_mode(mode)?;
    let stride = space.stride(mode);
    let entries = space
        .occupation_table(mode)
        .into_iter()
        .enumerate()
        .filter(|&(_, n)| n > 0)
        .map(|(i, n)| (i - stride, i, Complex64::new((n as f64).sqrt(), 0.0)))
        .collect();
    ModeOperator::new(space.clone(), OperatorRepr::Sparse(entries), false)
}

pub fn creation_op(space: &FockSpace, mode: usize) -> Result<ModeOperator> {
    Ok(annihilation_op(space, mode)?.adjoint())
}

/// Photon-number operator of `mode` (diagonal).
pub fn number_op(space: &FockSpace, mode: usize) -> Result<ModeOperator> {
    space.check_mode(mode)?;
    let diag = DVector::from_iterator(
        space.dimension(),
        space
            .occupation_table(mode)
            .into_iter()
            .map(|n| Complex64::new(n as f64, 0.0)),
    );
    ModeOperator::new(space.clone(), OperatorRepr::Diagonal(diag), false)
}

/// Cutoff sizing rule: smallest cutoff whose truncation deficit is below
/// `deficit_tolerance`, plus `guard` extra levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffPolicy {
    pub deficit_tolerance: f64,
    pub guard: usize,
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        Self {
            deficit_tolerance: 1e-10,
            guard: 5,
        }
    }
}

impl CutoffPolicy {
    pub fn with_guard(guard: usize) -> Self {
        Self {
            guard,
            ..Self::default()
        }
    }

    /// Applies the rule to a photon-number distribution given by its pmf
    /// (normalized to 1 over all n). Returns the cutoff including the guard band.
    pub fn cutoff_for(&self, mut pmf: impl FnMut(usize) -> f64, max_cutoff: usize) -> Result<usize> {
        let mut cdf = 0.0;
        for n in 0..=max_cutoff {
            cdf += pmf(n);
            if 1.0 - cdf < self.deficit_tolerance {
                return Ok(n + self.guard);
            }
        }
        Err(Error::CutoffTooSmall {
            cutoff: max_cutoff,
            deficit: 1.0 - cdf,
            tolerance: self.deficit_tolerance,
        })
    }
}
