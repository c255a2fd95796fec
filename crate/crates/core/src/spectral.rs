//! QFI matrices of low-rank, optionally number-dephased states without
//! forming density matrices.
//!
//! A state is given as an ensemble `rho = sum_k |y_k><y_k|` (unnormalized
//! columns). Dephasing over a set of modes splits `rho` into blocks of fixed
//! total photon number; number-conserving generators keep the blocks apart,
//! so the SLD sum runs block by block. Inside a block the nonzero spectrum
//! comes from the small Gram matrix `Y^dag Y`, and the kernel part of the SLD
//! sum is closed with `<m|G_j G_k|m>`, so the kernel is never diagonalized.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fisher::SLD_FLOOR;
use crate::fock::{DensityOperator, FockSpace, FockVector};
use crate::linalg::hermitian_eigen;
use crate::optics::QuadraticGenerator;

/// `rho = sum_k |y_k><y_k|` with the columns of `columns` as `y_k`.
#[derive(Clone, Debug)]
pub struct Ensemble {
    space: FockSpace,
    columns: DMatrix<Complex64>,
}

impl Ensemble {
    pub fn new(space: FockSpace, columns: DMatrix<Complex64>) -> Result<Self> {
        if columns.nrows() != space.dimension() {
            return Err(Error::SizeMismatch {
                expected: space.dimension(),
                actual: columns.nrows(),
            });
        }
        Ok(Self { space, columns })
    }

    pub fn pure(psi: &FockVector) -> Self {
        let d = psi.space().dimension();
        Self {
            space: psi.space().clone(),
            columns: DMatrix::from_column_slice(d, 1, psi.amplitudes().as_slice()),
        }
    }

    /// Eigen-ensemble of a density operator, keeping eigenvalues above `cut`.
    pub fn from_density(rho: &DensityOperator, cut: f64) -> Result<Self> {
        let (values, vectors) = hermitian_eigen(rho.matrix())?;
        let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] > cut).collect();
        let mut columns = DMatrix::zeros(rho.matrix().nrows(), keep.len());
        for (c, &i) in keep.iter().enumerate() {
            columns.set_column(c, &(vectors.column(i) * Complex64::new(values[i].sqrt(), 0.0)));
        }
        Ok(Self {
            space: rho.space().clone(),
            columns,
        })
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn columns(&self) -> &DMatrix<Complex64> {
        &self.columns
    }

    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }

    pub fn trace(&self) -> f64 {
        self.columns.norm_squared()
    }

    /// Dense `sum_k |y_k><y_k|`; only for small spaces.
    pub fn density(&self) -> DensityOperator {
        let m = &self.columns * self.columns.adjoint();
        DensityOperator::new(self.space.clone(), m).expect("square by construction")
    }
}

/// QFI matrix over a list of generators plus diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport {
    pub matrix: DMatrix<f64>,
    /// Trace carried by eigenvalues at or below the SLD floor.
    pub discarded_trace: f64,
    pub blocks: usize,
}

/// Groups basis indices by total photon number over `modes`.
pub fn number_blocks(space: &FockSpace, modes: &[usize]) -> Vec<Vec<usize>> {
    let totals = space.total_number_table(modes);
    let max = totals.iter().copied().max().unwrap_or(0);
    let mut blocks = vec![Vec::new(); max + 1];
    for (i, n) in totals.into_iter().enumerate() {
        blocks[n].push(i);
    }
    blocks.retain(|b| !b.is_empty());
    blocks
}

struct BlockSpectrum {
    lambda: DVector<f64>,
    /// `Y_b U`, columns scaled later.
    v: DMatrix<Complex64>,
    /// `X_j,b U` per generator.
    w: Vec<DMatrix<Complex64>>,
}

/// QFI matrix `F_jk` of `rho` (dephased over `dephase` when given) for phase
/// generators applied after the state is prepared.
pub fn qfim_ensemble(
    ensemble: &Ensemble,
    generators: &[QuadraticGenerator],
    dephase: Option<&[usize]>,
) -> Result<SpectralReport> {
    let space = ensemble.space();
    let y = ensemble.columns();
    let x: Vec<DMatrix<Complex64>> = generators.iter().map(|g| g.apply_columns(space, y)).collect();
    let blocks = match dephase {
        Some(modes) if !modes.is_empty() => number_blocks(space, modes),
        Some(_) => return Err(Error::EmptyModeSet),
        None => vec![(0..space.dimension()).collect()],
    };
    let ng = generators.len();

    let mut spectra = Vec::with_capacity(blocks.len());
    let mut max_lambda: f64 = 0.0;
    for idx in &blocks {
        let yb = y.select_rows(idx.iter());
        if yb.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            continue;
        }
        let gram = yb.adjoint() * &yb;
        let (lambda, vectors) = hermitian_eigen(&gram)?;
        max_lambda = max_lambda.max(lambda.max());
        let v = &yb * &vectors;
        let w = x.iter().map(|xj| xj.select_rows(idx.iter()) * &vectors).collect();
        spectra.push(BlockSpectrum {
            lambda,
            v,
            w,
        });
    }
    let floor = SLD_FLOOR * max_lambda;

    let mut f = DMatrix::zeros(ng, ng);
    let mut discarded_trace = 0.0;
    for block in &spectra {
        let support: Vec<usize> = (0..block.lambda.len()).filter(|&m| block.lambda[m] > floor).collect();
        discarded_trace += block
            .lambda
            .iter()
            .filter(|&&l| l <= floor)
            .map(|l| l.max(0.0))
            .sum::<f64>();
        if support.is_empty() {
            continue;
        }
        let lam: Vec<f64> = support.iter().map(|&m| block.lambda[m]).collect();
        let inv_sqrt: Vec<f64> = lam.iter().map(|l| 1.0 / l.sqrt()).collect();
        // M_j[n, m] = <n|G_j|m> on the support
        let s = support.len();
        let mut mats = Vec::with_capacity(ng);
        for j in 0..ng {
            let mut m = DMatrix::zeros(s, s);
            for (b, &mb) in support.iter().enumerate() {
                let wcol = block.w[j].column(mb);
                for (a, &ma) in support.iter().enumerate() {
                    m[(a, b)] = block.v.column(ma).dotc(&wcol) * (inv_sqrt[a] * inv_sqrt[b]);
                }
            }
            mats.push(m);
        }
        for j in 0..ng {
            for k in j..ng {
                let mut acc = 0.0;
                for (a, &ma) in support.iter().enumerate() {
                    // kernel completion: 4 lambda_m Re[<m|G_j G_k|m> - sum_n <m|G_j|n><n|G_k|m>]
                    let gg = block.w[j].column(ma).dotc(&block.w[k].column(ma)) / lam[a];
                    let mut inside = Complex64::new(0.0, 0.0);
                    for n in 0..s {
                        inside += mats[j][(n, a)].conj() * mats[k][(n, a)];
                    }
                    acc += 4.0 * lam[a] * (gg - inside).re;
                    for b in 0..s {
                        let diff = lam[a] - lam[b];
                        if diff == 0.0 {
                            continue;
                        }
                        let sum = lam[a] + lam[b];
                        acc += 2.0 * diff * diff / sum * (mats[j][(a, b)] * mats[k][(b, a)]).re;
                    }
                }
                f[(j, k)] += acc;
            }
        }
    }
    for j in 0..ng {
        for k in 0..j {
            f[(j, k)] = f[(k, j)];
        }
    }
    Ok(SpectralReport {
        matrix: f,
        discarded_trace,
        blocks: spectra.len(),
    })
}

/// Contracts a basis QFI matrix with generator coordinates: `C F C^T`.
pub fn contract(basis_fisher: &DMatrix<f64>, coordinates: &[[f64; 4]]) -> DMatrix<f64> {
    let c = DMatrix::from_fn(coordinates.len(), 4, |i, j| coordinates[i][j]);
    &c * basis_fisher * c.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{derivative_density, qfim_mixed};
    use crate::states::dephase_density;

    fn random_state(space: &FockSpace, rank: usize, seed: u64) -> DMatrix<Complex64> {
        // small deterministic LCG; enough for a fixed test fixture
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut y = DMatrix::from_fn(space.dimension(), rank, |_, _| Complex64::new(next(), next()));
        let n = y.norm();
        y /= Complex64::new(n, 0.0);
        y
    }

    fn dense_reference(ens: &Ensemble, gens: &[QuadraticGenerator], dephase: Option<&[usize]>) -> DMatrix<f64> {
        let mut rho = ens.density();
        if let Some(m) = dephase {
            rho = dephase_density(&rho, m).unwrap();
        }
        let drho: Vec<_> = gens
            .iter()
            .map(|g| derivative_density(&rho, &g.to_mode_operator(ens.space()).unwrap()).unwrap())
            .collect();
        qfim_mixed(&rho, &drho).unwrap().matrix().clone()
    }

    #[test]
    fn matches_dense_sld() {
        let space = FockSpace::uniform(2, 4).unwrap();
        let gens: Vec<_> = QuadraticGenerator::pair_basis(2).into_iter().collect();
        for (rank, dephase) in [(1, None), (3, None), (1, Some(&[0usize, 1][..])), (4, Some(&[0usize, 1][..]))] {
            let ens = Ensemble::new(space.clone(), random_state(&space, rank, 7 + rank as u64)).unwrap();
            let fast = qfim_ensemble(&ens, &gens, dephase).unwrap().matrix;
            let slow = dense_reference(&ens, &gens, dephase);
            assert!((&fast - &slow).amax() < 1e-9, "rank {rank}: {fast} vs {slow}");
        }
    }

    #[test]
    fn pure_state_is_four_times_covariance() {
        let space = FockSpace::uniform(2, 3).unwrap();
        let y = random_state(&space, 1, 3);
        let psi = FockVector::new(space.clone(), y.column(0).into_owned()).unwrap();
        let g = QuadraticGenerator::number(0, 2);
        let gpsi = FockVector::from_vec(space.clone(), g.apply_amplitudes(&space, psi.amplitudes().as_slice())).unwrap();
        let mean = psi.inner(&gpsi).unwrap().re;
        let var = gpsi.norm_sqr() - mean * mean;
        let f = qfim_ensemble(&Ensemble::pure(&psi), &[g], None).unwrap().matrix[(0, 0)];
        assert!((f - 4.0 * var).abs() < 1e-12);
    }
}
