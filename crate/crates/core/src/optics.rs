//! Interferometer elements: beam splitters, phase shifts, quadratic phase
//! generators and photon loss.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{
    DensityOperator, FockSpace, ModeOperator, OperatorBlock, OperatorRepr, ONE, ZERO,
};
use crate::states::{MODE_A, MODE_B};

/// Which modes carry the phase shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorConvention {
    /// (i) `exp(-i phi a^dag a)`.
    UpperOnly,
    /// (ii) `exp(-i phi/2 a^dag a + i phi/2 b^dag b)`.
    Symmetric,
    /// (iii) independent phases on `a` and `b` against an external reference.
    TwoParam,
}

/// Number-conserving quadratic generator `G = sum_ij h_ij a_i^dag a_j` with
/// Hermitian coefficient matrix `h` over the modes.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGenerator {
    coefficients: DMatrix<Complex64>,
}

impl QuadraticGenerator {
    pub fn new(coefficients: DMatrix<Complex64>) -> Result<Self> {
        if coefficients.nrows() != coefficients.ncols() {
            return Err(Error::SizeMismatch {
                expected: coefficients.nrows(),
                actual: coefficients.ncols(),
            });
        }
        let dev = crate::fock::max_abs_diff(&coefficients, &coefficients.adjoint());
        if dev > 1e-12 {
            return Err(Error::NonHermitian { deviation: dev });
        }
        Ok(Self { coefficients })
    }

    /// `n_mode` on a space with `modes` modes.
    pub fn number(mode: usize, modes: usize) -> Self {
        let mut h = DMatrix::zeros(modes, modes);
        h[(mode, mode)] = ONE;
        Self { coefficients: h }
    }

    /// Generators for a convention, acting on modes `a = 0`, `b = 1`.
    pub fn for_convention(convention: GeneratorConvention, modes: usize) -> Vec<Self> {
        match convention {
            GeneratorConvention::UpperOnly => vec![Self::number(MODE_A, modes)],
            GeneratorConvention::Symmetric => {
                let mut h = DMatrix::zeros(modes, modes);
                h[(MODE_A, MODE_A)] = Complex64::new(0.5, 0.0);
                h[(MODE_B, MODE_B)] = Complex64::new(-0.5, 0.0);
                vec![Self { coefficients: h }]
            }
            GeneratorConvention::TwoParam => {
                vec![Self::number(MODE_A, modes), Self::number(MODE_B, modes)]
            }
        }
    }

    /// Real basis of Hermitian generators on the interferometer pair:
    /// `n_a`, `n_b`, `a^dag b + b^dag a`, `i (a^dag b - b^dag a)`.
    pub fn pair_basis(modes: usize) -> [Self; 4] {
        let mut x = DMatrix::zeros(modes, modes);
        x[(MODE_A, MODE_B)] = ONE;
        x[(MODE_B, MODE_A)] = ONE;
        let mut y = DMatrix::zeros(modes, modes);
        y[(MODE_A, MODE_B)] = Complex64::new(0.0, 1.0);
        y[(MODE_B, MODE_A)] = Complex64::new(0.0, -1.0);
        [
            Self::number(MODE_A, modes),
            Self::number(MODE_B, modes),
            Self { coefficients: x },
            Self { coefficients: y },
        ]
    }

    /// Coordinates in [`Self::pair_basis`]; `None` if the generator touches other modes.
    pub fn pair_coordinates(&self) -> Option<[f64; 4]> {
        let h = &self.coefficients;
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                if (i > MODE_B || j > MODE_B) && h[(i, j)] != ZERO {
                    return None;
                }
            }
        }
        Some([
            h[(MODE_A, MODE_A)].re,
            h[(MODE_B, MODE_B)].re,
            h[(MODE_A, MODE_B)].re,
            h[(MODE_A, MODE_B)].im,
        ])
    }

    pub fn coefficients(&self) -> &DMatrix<Complex64> {
        &self.coefficients
    }

    pub fn mode_count(&self) -> usize {
        self.coefficients.nrows()
    }

    /// `U^dag G U` for a passive unitary with `U^dag a_i U = sum_j S_ij a_j`,
    /// i.e. coefficients `S^dag h S`.
    pub fn transformed(&self, mode_matrix: &DMatrix<Complex64>) -> Self {
        Self {
            coefficients: mode_matrix.adjoint() * &self.coefficients * mode_matrix,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        let m = self.mode_count();
        (0..m).all(|i| (0..m).all(|j| i == j || self.coefficients[(i, j)] == ZERO))
    }

    /// `G x` on the truncated space; hops that leave the space are dropped.
    pub fn apply_amplitudes(&self, space: &FockSpace, x: &[Complex64]) -> Vec<Complex64> {
        let tables = self.tables(space);
        let mut y = vec![ZERO; x.len()];
        self.apply_into(space, &tables, x, &mut y);
        y
    }

    /// `G X` column by column for a `dimension x K` matrix.
    pub fn apply_columns(&self, space: &FockSpace, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let tables = self.tables(space);
        let mut y = DMatrix::zeros(x.nrows(), x.ncols());
        for k in 0..x.ncols() {
            let src = x.column(k);
            let mut dst = y.column_mut(k);
            self.apply_into(space, &tables, src.as_slice(), dst.as_mut_slice());
        }
        y
    }

    fn tables(&self, space: &FockSpace) -> Vec<Vec<usize>> {
        let m = self.mode_count();
        assert!(m <= space.mode_count(), "generator has more modes than the space");
        (0..m).map(|k| space.occupation_table(k)).collect()
    }

    fn apply_into(&self, space: &FockSpace, tables: &[Vec<usize>], x: &[Complex64], y: &mut [Complex64]) {
        let m = self.mode_count();
        let diag: Vec<f64> = (0..m).map(|k| self.coefficients[(k, k)].re).collect();
        let hops: Vec<(usize, usize, Complex64)> = (0..m)
            .flat_map(|k| (0..m).map(move |l| (k, l)))
            .filter(|&(k, l)| k != l && self.coefficients[(k, l)] != ZERO)
            .map(|(k, l)| (k, l, self.coefficients[(k, l)]))
            .collect();
        for (idx, &xi) in x.iter().enumerate() {
            if xi == ZERO {
                continue;
            }
            let d: f64 = (0..m).map(|k| diag[k] * tables[k][idx] as f64).sum();
            y[idx] += xi * d;
            // h_kl a_k^dag a_l moves one photon from l to k
            for &(k, l, h) in &hops {
                let nl = tables[l][idx];
                let nk = tables[k][idx];
                if nl == 0 || nk >= space.cutoff(k) {
                    continue;
                }
                let target = idx + space.stride(k) - space.stride(l);
                y[target] += h * (((nl * (nk + 1)) as f64).sqrt()) * xi;
            }
        }
    }

    pub fn to_mode_operator(&self, space: &FockSpace) -> Result<ModeOperator> {
        let d = space.dimension();
        if self.is_diagonal() {
            let mut diag = DVector::from_element(d, ZERO);
            for k in 0..self.mode_count() {
                for (z, n) in diag.iter_mut().zip(space.occupation_table(k)) {
                    *z += self.coefficients[(k, k)] * n as f64;
                }
            }
            return ModeOperator::new(space.clone(), OperatorRepr::Diagonal(diag), false);
        }
        let mut entries = Vec::new();
        let mut unit = vec![ZERO; d];
        for j in 0..d {
            unit[j] = ONE;
            for (i, z) in self.apply_amplitudes(space, &unit).into_iter().enumerate() {
                if z != ZERO {
                    entries.push((i, j, z));
                }
            }
            unit[j] = ZERO;
        }
        ModeOperator::new(space.clone(), OperatorRepr::Sparse(entries), false)
    }
}

fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        });
    }
    Ok(())
}

/// Mixing angle `asin(sqrt(tau))`.
pub fn mixing_angle(tau: f64) -> Result<f64> {
    check_unit_interval("tau", tau)?;
    Ok(tau.sqrt().asin())
}

/// Mode transformation of `B_tau = exp[-i theta (a^dag b + a b^dag)]`:
/// `B^dag a B = cos(theta) a - i sin(theta) b`, `B^dag b B = cos(theta) b - i sin(theta) a`.
pub fn beam_splitter_mode_matrix(tau: f64, modes: usize, pair: (usize, usize)) -> Result<DMatrix<Complex64>> {
    let theta = mixing_angle(tau)?;
    let (c, s) = (theta.cos(), theta.sin());
    let mut m = DMatrix::identity(modes, modes);
    m[(pair.0, pair.0)] = Complex64::new(c, 0.0);
    m[(pair.1, pair.1)] = Complex64::new(c, 0.0);
    m[(pair.0, pair.1)] = Complex64::new(0.0, -s);
    m[(pair.1, pair.0)] = Complex64::new(0.0, -s);
    Ok(m)
}

/// Beam splitter `exp[-i asin(sqrt(tau)) (x^dag y + x y^dag)]` on the mode pair
/// `modes = (x, y)` of `space`, stored block-diagonally by the photon number
/// of the pair.
///
/// Sectors that fit entirely inside the truncated space are built by expanding
/// the transformed creation operators; sectors clipped by a cutoff use the
/// exact exponential of the truncated generator, so the operator is unitary on
/// the whole truncated space either way.
pub fn beam_splitter(tau: f64, space: &FockSpace, modes: (usize, usize)) -> Result<ModeOperator> {
    let theta = mixing_angle(tau)?;
    let (x, y) = modes;
    space.check_mode(x)?;
    space.check_mode(y)?;
    if x == y {
        return Err(Error::Config("beam splitter needs two distinct modes".into()));
    }
    let (cx, cy) = (space.cutoff(x), space.cutoff(y));
    let sector_blocks = pair_sector_blocks(theta, cx, cy);

    let spectators: Vec<usize> = (0..space.mode_count()).filter(|m| *m != x && *m != y).collect();
    let spectator_space = if spectators.is_empty() {
        None
    } else {
        Some(space.subspace(&spectators)?)
    };
    let spectator_count = spectator_space.as_ref().map_or(1, FockSpace::dimension);
    let mut blocks = Vec::with_capacity(spectator_count * (cx + cy + 1));
    let mut occ = vec![0; space.mode_count()];
    for s in 0..spectator_count {
        if let Some(sp) = &spectator_space {
            for (pos, &m) in spectators.iter().enumerate() {
                occ[m] = sp.occupation(s)[pos];
            }
        }
        for (total, block) in sector_blocks.iter().enumerate() {
            let lo = total.saturating_sub(cy);
            let hi = total.min(cx);
            let indices = (lo..=hi)
                .map(|nx| {
                    occ[x] = nx;
                    occ[y] = total - nx;
                    space.index(&occ)
                })
                .collect();
            blocks.push(OperatorBlock {
                indices,
                matrix: Arc::clone(block),
            });
        }
    }
    ModeOperator::new(space.clone(), OperatorRepr::Blocks(blocks), true)
}

/// Per-sector matrices of the two-mode beam splitter, indexed by total photon
/// number `N`; rows/columns ordered by ascending `n_x` over the allowed range.
fn pair_sector_blocks(theta: f64, cx: usize, cy: usize) -> Vec<Arc<DMatrix<Complex64>>> {
    let (c, s) = (theta.cos(), theta.sin());
    let full = cx.min(cy);
    let mut out: Vec<Arc<DMatrix<Complex64>>> = Vec::with_capacity(cx + cy + 1);

    // B x^dag B^dag = c x^dag - i s y^dag,  B y^dag B^dag = c y^dag - i s x^dag
    let mut prev = DMatrix::from_element(1, 1, ONE);
    out.push(Arc::new(prev.clone()));
    for n in 1..=full {
        let mut cur = DMatrix::zeros(n + 1, n + 1);
        for k in 0..=n {
            // output column for input |k, n-k>
            let (src, via_x) = if k >= 1 { (k - 1, true) } else { (0, false) };
            let norm = if via_x { (k as f64).sqrt() } else { (n as f64).sqrt() };
            for j in 0..n {
                let v = prev[(j, src)];
                if v == ZERO {
                    continue;
                }
                // x^dag on |j, n-1-j> -> sqrt(j+1) |j+1, n-1-j>
                // y^dag on |j, n-1-j> -> sqrt(n-j) |j, n-j>
                let up = ((j + 1) as f64).sqrt();
                let stay = ((n - j) as f64).sqrt();
                let (cx_coef, cy_coef) = if via_x {
                    (Complex64::new(c, 0.0), Complex64::new(0.0, -s))
                } else {
                    (Complex64::new(0.0, -s), Complex64::new(c, 0.0))
                };
                cur[(j + 1, k)] += cx_coef * up * v / norm;
                cur[(j, k)] += cy_coef * stay * v / norm;
            }
        }
        out.push(Arc::new(cur.clone()));
        prev = cur;
    }
    for n in full + 1..=cx + cy {
        out.push(Arc::new(truncated_sector_exponential(theta, n, cx, cy)));
    }
    out
}

/// `exp(-i theta K)` with `K` the hopping generator restricted to the clipped sector `N`.
fn truncated_sector_exponential(theta: f64, n: usize, cx: usize, cy: usize) -> DMatrix<Complex64> {
    let lo = n.saturating_sub(cy);
    let hi = n.min(cx);
    let size = hi - lo + 1;
    let mut k = DMatrix::<f64>::zeros(size, size);
    for i in 0..size.saturating_sub(1) {
        let nx = lo + i;
        let ny = n - nx;
        let v = (((nx + 1) * ny) as f64).sqrt();
        k[(i + 1, i)] = v;
        k[(i, i + 1)] = v;
    }
    let eig = SymmetricEigen::new(k);
    let v = eig.eigenvectors.map(|z| Complex64::new(z, 0.0));
    let phases = DVector::from_iterator(
        size,
        eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -theta * l)),
    );
    let mut scaled = v.clone();
    for (j, p) in phases.iter().enumerate() {
        for i in 0..size {
            scaled[(i, j)] *= p;
        }
    }
    scaled * v.transpose()
}

/// `V^x_theta = exp(-i theta x^dag x)`.
pub fn phase_shift(space: &FockSpace, mode: usize, theta: f64) -> Result<ModeOperator> {
    space.check_mode(mode)?;
    let diag = DVector::from_iterator(
        space.dimension(),
        space
            .occupation_table(mode)
            .into_iter()
            .map(|n| Complex64::from_polar(1.0, -theta * n as f64)),
    );
    ModeOperator::new(space.clone(), OperatorRepr::Diagonal(diag), true)
}

#[derive(Clone, Debug)]
pub enum PhaseUnitary {
    Single(ModeOperator),
    /// `(V^a_{phi_1}, V^b_{phi_2})`.
    Pair(ModeOperator, ModeOperator),
}

/// Phase-shift unitary of a convention. For [`GeneratorConvention::TwoParam`]
/// the phase is split as `phi_1 = phi/2`, `phi_2 = -phi/2` (a pure difference
/// phase); use [`phase_pair`] for arbitrary `(phi_1, phi_2)`.
pub fn phase_unitary(phi: f64, convention: GeneratorConvention, space: &FockSpace) -> Result<PhaseUnitary> {
    if !phi.is_finite() {
        return Err(Error::InvalidParameter {
            name: "phi",
            value: phi,
            reason: "must be finite",
        });
    }
    match convention {
        GeneratorConvention::UpperOnly => Ok(PhaseUnitary::Single(phase_shift(space, MODE_A, phi)?)),
        GeneratorConvention::Symmetric => {
            let va = phase_shift(space, MODE_A, phi / 2.0)?;
            let vb = phase_shift(space, MODE_B, -phi / 2.0)?;
            Ok(PhaseUnitary::Single(va.compose(&vb)?))
        }
        GeneratorConvention::TwoParam => {
            let (va, vb) = phase_pair(phi / 2.0, -phi / 2.0, space)?;
            Ok(PhaseUnitary::Pair(va, vb))
        }
    }
}

pub fn phase_pair(phi1: f64, phi2: f64, space: &FockSpace) -> Result<(ModeOperator, ModeOperator)> {
    Ok((phase_shift(space, MODE_A, phi1)?, phase_shift(space, MODE_B, phi2)?))
}

impl PhaseUnitary {
    /// The combined operator (product of the pair).
    pub fn combined(&self) -> Result<ModeOperator> {
        match self {
            PhaseUnitary::Single(u) => Ok(u.clone()),
            PhaseUnitary::Pair(a, b) => a.compose(b),
        }
    }
}

/// Pure-loss channel with power transmission `eta` on each of `modes`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossModel {
    pub eta: f64,
    pub modes: Vec<usize>,
}

impl LossModel {
    pub fn new(eta: f64, modes: Vec<usize>) -> Result<Self> {
        check_unit_interval("eta", eta)?;
        Ok(Self { eta, modes })
    }

    /// Equal loss in both interferometer arms.
    pub fn arms(eta: f64) -> Result<Self> {
        Self::new(eta, vec![MODE_A, MODE_B])
    }

    pub fn is_lossless(&self) -> bool {
        self.eta == 1.0 || self.modes.is_empty()
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// Loss Kraus coefficients: `coeff[k][n] = <n-k|K_k|n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k)`.
pub fn loss_kraus_coefficients(eta: f64, cutoff: usize) -> Vec<Vec<f64>> {
    let lf = ln_factorials(cutoff);
    (0..=cutoff)
        .map(|k| {
            (0..=cutoff)
                .map(|n| {
                    if n < k {
                        return 0.0;
                    }
                    let kept = n - k;
                    if (eta == 0.0 && kept > 0) || (eta == 1.0 && k > 0) {
                        return 0.0;
                    }
                    let mut ln = 0.5 * (lf[n] - lf[k] - lf[kept]);
                    if kept > 0 {
                        ln += 0.5 * kept as f64 * eta.ln();
                    }
                    if k > 0 {
                        ln += 0.5 * k as f64 * (1.0 - eta).ln();
                    }
                    ln.exp()
                })
                .collect()
        })
        .collect()
}

/// Kraus operators `K_0 ... K_cutoff` of pure loss on one mode of `space`.
pub fn loss_kraus_operators(space: &FockSpace, mode: usize, eta: f64) -> Result<Vec<ModeOperator>> {
    space.check_mode(mode)?;
    check_unit_interval("eta", eta)?;
    let cutoff = space.cutoff(mode);
    let stride = space.stride(mode);
    let table = space.occupation_table(mode);
    let coeff = loss_kraus_coefficients(eta, cutoff);
    (0..=cutoff)
        .map(|k| {
            let entries = table
                .iter()
                .enumerate()
                .filter(|(_, &n)| n >= k && coeff[k][n] != 0.0)
                .map(|(i, &n)| (i - k * stride, i, Complex64::new(coeff[k][n], 0.0)))
                .collect();
            ModeOperator::new(space.clone(), OperatorRepr::Sparse(entries), false)
        })
        .collect()
}

/// Applies `K_k` of single-mode loss to a single-mode amplitude list.
pub fn apply_loss_kraus(amplitudes: &[Complex64], k: usize, coeff: &[Vec<f64>]) -> Vec<Complex64> {
    let mut out = vec![ZERO; amplitudes.len()];
    for (n, a) in amplitudes.iter().enumerate().skip(k) {
        out[n - k] = a * coeff[k][n];
    }
    out
}

/// Applies the loss channel mode by mode as a Kraus sum.
pub fn loss_channel(rho: &DensityOperator, model: &LossModel) -> Result<DensityOperator> {
    check_unit_interval("eta", model.eta)?;
    let space = rho.space().clone();
    let mut current = rho.matrix().clone();
    if model.eta == 1.0 {
        return DensityOperator::new(space, current);
    }
    for &mode in &model.modes {
        space.check_mode(mode)?;
        let cutoff = space.cutoff(mode);
        let stride = space.stride(mode);
        let table = space.occupation_table(mode);
        let coeff = loss_kraus_coefficients(model.eta, cutoff);
        let d = space.dimension();
        let mut next = DMatrix::zeros(d, d);
        for j in 0..d {
            let nj = table[j];
            for i in 0..d {
                let z = current[(i, j)];
                if z == ZERO {
                    continue;
                }
                let ni = table[i];
                for k in 0..=ni.min(nj) {
                    let w = coeff[k][ni] * coeff[k][nj];
                    if w != 0.0 {
                        next[(i - k * stride, j - k * stride)] += z * w;
                    }
                }
            }
        }
        current = next;
    }
    DensityOperator::new(space, current)
}
