//! Classical and quantum Fisher information, QFI matrices, the sum/difference
//! basis change and Cramer-Rao bounds.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{DensityOperator, FockVector, ModeOperator};

/// Outcomes with probability below this are skipped by [`classical_fisher`].
pub const PROBABILITY_FLOOR: f64 = 1e-14;
/// Relative eigenvalue floor of the SLD sum: pairs with
/// `lambda_m + lambda_n <= SLD_FLOOR * max(lambda)` are dropped.
pub const SLD_FLOOR: f64 = 1e-12;
/// Allowed deviation of `<psi|psi>` (or `tr rho`) from one.
pub const NORM_TOLERANCE: f64 = 1e-8;
/// Allowed Hermiticity deviation of a phase generator.
pub const GENERATOR_HERMITICITY_TOLERANCE: f64 = 1e-10;

/// Real symmetric Fisher information matrix with parameter labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherMatrix {
    labels: Vec<String>,
    matrix: DMatrix<f64>,
}

impl FisherMatrix {
    /// Symmetrizes `matrix` after checking it is symmetric within 1e-10 (relative to its scale).
    pub fn new(labels: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != labels.len() {
            return Err(Error::SizeMismatch {
                expected: labels.len(),
                actual: matrix.nrows(),
            });
        }
        let scale = matrix.amax().max(1.0);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::Spectral(format!("Fisher matrix asymmetric by {asym:.3e}")));
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self { labels, matrix })
    }

    pub fn scalar(label: &str, value: f64) -> Self {
        Self {
            labels: vec![label.to_string()],
            matrix: DMatrix::from_element(1, 1, value),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// The single entry of a 1x1 matrix.
    pub fn value(&self) -> f64 {
        self.matrix[(0, 0)]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// PSD check: eigenvalues `>= -1e-8 * max eigenvalue`.
    pub fn is_psd(&self) -> bool {
        let ev = self.eigenvalues();
        let max = ev.last().copied().unwrap_or(0.0).max(0.0);
        ev.first().is_none_or(|&min| min >= -1e-8 * max.max(f64::MIN_POSITIVE))
    }
}

/// Lower bound on the uncertainty of one parameter after `repetitions` runs.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionBound {
    pub label: String,
    pub value: f64,
    pub repetitions: u64,
    /// `lambda_max / lambda_min` of the Fisher matrix (infinite when singular).
    pub condition_number: f64,
    /// True when the pseudo-inverse was used.
    pub pseudo_inverse: bool,
}

/// Classical Fisher information together with the probability-floor bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalFisherReport {
    pub fisher: FisherMatrix,
    pub skipped_outcomes: usize,
    /// Sum of `|dp|` over outcomes below [`PROBABILITY_FLOOR`].
    pub skipped_derivative_mass: f64,
}

/// `F = sum_n (dp_n)^2 / p_n` over outcomes with `p_n >= 1e-14`.
pub fn classical_fisher(dist: &[f64], ddist: &[f64]) -> Result<FisherMatrix> {
    classical_fisher_report(dist, ddist).map(|r| r.fisher)
}

pub fn classical_fisher_report(dist: &[f64], ddist: &[f64]) -> Result<ClassicalFisherReport> {
    if dist.len() != ddist.len() {
        return Err(Error::SizeMismatch {
            expected: dist.len(),
            actual: ddist.len(),
        });
    }
    let mut f = 0.0;
    let mut skipped_outcomes = 0;
    let mut skipped_derivative_mass = 0.0;
    for (n, (&p, &dp)) in dist.iter().zip(ddist).enumerate() {
        if p < -1e-12 {
            return Err(Error::NegativeProbability { outcome: n, value: p });
        }
        if p < PROBABILITY_FLOOR {
            if dp != 0.0 {
                skipped_outcomes += 1;
                skipped_derivative_mass += dp.abs();
            }
            continue;
        }
        f += dp * dp / p;
    }
    Ok(ClassicalFisherReport {
        fisher: FisherMatrix::scalar("phi", f),
        skipped_outcomes,
        skipped_derivative_mass,
    })
}

fn check_norm(psi: &FockVector) -> Result<()> {
    let n = psi.norm_sqr();
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NormViolation {
            norm_sq: n,
            tolerance: NORM_TOLERANCE,
        });
    }
    Ok(())
}

fn check_generator(generator: &ModeOperator) -> Result<()> {
    let dev = generator.hermiticity_deviation();
    if dev > GENERATOR_HERMITICITY_TOLERANCE {
        return Err(Error::NonHermitian { deviation: dev });
    }
    Ok(())
}

/// `d|psi_phi>/dphi = -i G |psi>`.
pub fn derivative_state(psi: &FockVector, generator: &ModeOperator) -> Result<FockVector> {
    check_generator(generator)?;
    Ok(generator.apply(psi)?.scaled(Complex64::new(0.0, -1.0)))
}

/// `d rho/dphi = -i [G, rho]`.
pub fn derivative_density(rho: &DensityOperator, generator: &ModeOperator) -> Result<DensityOperator> {
    check_generator(generator)?;
    let g = generator.to_dense();
    if g.nrows() != rho.matrix().nrows() {
        return Err(Error::SizeMismatch {
            expected: rho.matrix().nrows(),
            actual: g.nrows(),
        });
    }
    let comm = &g * rho.matrix() - rho.matrix() * &g;
    DensityOperator::new(rho.space().clone(), comm * Complex64::new(0.0, -1.0))
}

fn pure_labels(n: usize) -> Vec<String> {
    if n == 1 {
        vec!["phi".to_string()]
    } else {
        (1..=n).map(|i| format!("phi{i}")).collect()
    }
}

/// `F_Q = 4 (<psi'|psi'> - |<psi'|psi>|^2)`.
pub fn qfi_pure(psi: &FockVector, dpsi: &FockVector) -> Result<FisherMatrix> {
    qfim_pure(psi, std::slice::from_ref(dpsi))
}

/// `F_ij = 4 Re(<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>)`.
pub fn qfim_pure(psi: &FockVector, dpsi: &[FockVector]) -> Result<FisherMatrix> {
    check_norm(psi)?;
    let n = dpsi.len();
    let overlaps: Vec<Complex64> = dpsi.iter().map(|d| d.inner(psi)).collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 4.0 * (dpsi[i].inner(&dpsi[j])? - overlaps[i] * overlaps[j].conj()).re;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    FisherMatrix::new(pure_labels(n), m)
}

/// Mixed-state QFI matrix together with SLD diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct SldReport {
    pub fisher: FisherMatrix,
    /// `sum |<m|d_j rho|n>|^2` over dropped eigenpairs, summed over parameters.
    pub dropped_weight: f64,
    /// Number of eigenvalues above the floor.
    pub rank: usize,
}

/// Scalar mixed-state QFI from the SLD.
pub fn qfi_mixed(rho: &DensityOperator, drho: &DensityOperator) -> Result<FisherMatrix> {
    qfim_mixed(rho, std::slice::from_ref(drho))
}

/// `F_jk = sum_{lambda_m + lambda_n > eps} 2 Re[<m|d_j rho|n><n|d_k rho|m>] / (lambda_m + lambda_n)`.
pub fn qfim_mixed(rho: &DensityOperator, drho: &[DensityOperator]) -> Result<FisherMatrix> {
    qfim_mixed_report(rho, drho).map(|r| r.fisher)
}

pub fn qfim_mixed_report(rho: &DensityOperator, drho: &[DensityOperator]) -> Result<SldReport> {
    let dev = rho.hermiticity_deviation();
    if dev > 1e-12 {
        return Err(Error::NonHermitian { deviation: dev });
    }
    let t = rho.trace();
    if (t - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::TraceViolation {
            trace: t,
            tolerance: NORM_TOLERANCE,
        });
    }
    let d = rho.matrix().nrows();
    for dr in drho {
        if dr.matrix().nrows() != d {
            return Err(Error::SizeMismatch {
                expected: d,
                actual: dr.matrix().nrows(),
            });
        }
    }
    let (lambda, v) = crate::linalg::hermitian_eigen(rho.matrix())?;
    let vh = v.adjoint();
    let rotated: Vec<DMatrix<Complex64>> = drho.iter().map(|dr| &vh * dr.matrix() * &v).collect();
    let max = lambda.iter().copied().fold(0.0, f64::max);
    let floor = SLD_FLOOR * max;
    let n = drho.len();
    let mut f = DMatrix::zeros(n, n);
    let mut dropped_weight = 0.0;
    for a in 0..d {
        for b in 0..d {
            let s = lambda[a] + lambda[b];
            if s <= floor {
                dropped_weight += rotated.iter().map(|r| r[(a, b)].norm_sqr()).sum::<f64>();
                continue;
            }
            for j in 0..n {
                for k in j..n {
                    f[(j, k)] += 2.0 * (rotated[j][(a, b)] * rotated[k][(b, a)]).re / s;
                }
            }
        }
    }
    for j in 0..n {
        for k in 0..j {
            f[(j, k)] = f[(k, j)];
        }
    }
    Ok(SldReport {
        fisher: FisherMatrix::new(pure_labels(n), f)?,
        dropped_weight,
        rank: lambda.iter().filter(|&&l| l > floor).count(),
    })
}

fn jacobian() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, -0.5])
}

/// `F_pm = J^T F J` with `J = d(phi1, phi2)/d(phi+, phi-) = [[1, 1], [1, -1]] / 2`.
pub fn to_plus_minus(f: &FisherMatrix) -> Result<FisherMatrix> {
    if f.dim() != 2 {
        return Err(Error::SizeMismatch {
            expected: 2,
            actual: f.dim(),
        });
    }
    let j = jacobian();
    FisherMatrix::new(vec!["phi+".into(), "phi-".into()], j.transpose() * f.matrix() * j)
}

/// Inverse of [`to_plus_minus`].
pub fn from_plus_minus(f: &FisherMatrix) -> Result<FisherMatrix> {
    if f.dim() != 2 {
        return Err(Error::SizeMismatch {
            expected: 2,
            actual: f.dim(),
        });
    }
    let jinv = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
    FisherMatrix::new(pure_labels(2), jinv.transpose() * f.matrix() * jinv)
}

/// Diagonal entry `(F^-1)_ii`: adjugate for 2x2, pseudo-inverse when
/// `det < 1e-12 tr^2`. Returns `(value, condition number, used pseudo-inverse)`.
// negated comparisons also reject NaN
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn inverse_diagonal(f: &FisherMatrix, index: usize) -> Result<(f64, f64, bool)> {
    let label = || f.labels()[index].clone();
    match f.dim() {
        1 => {
            let v = f.value();
            if !(v > 0.0) {
                return Err(Error::NotIdentifiable(label()));
            }
            Ok((1.0 / v, 1.0, false))
        }
        2 => {
            let (a, b, d) = (f.get(0, 0), f.get(0, 1), f.get(1, 1));
            let tr = a + d;
            if !(tr > 0.0) {
                return Err(Error::NotIdentifiable(label()));
            }
            let det = a * d - b * b;
            let disc = ((a - d) * (a - d) / 4.0 + b * b).sqrt();
            let (lmax, lmin) = (tr / 2.0 + disc, tr / 2.0 - disc);
            if det >= 1e-12 * tr * tr {
                let adj = if index == 0 { d } else { a };
                return Ok((adj / det, lmax / lmin, false));
            }
            // rank one: F ~ lmax u u^T, kernel spanned by u_perp
            let u = if b.abs() > 0.0 || a >= d {
                let (x, y) = (lmax - d, b);
                let n = (x * x + y * y).sqrt();
                if n > 0.0 {
                    (x / n, y / n)
                } else {
                    (1.0, 0.0)
                }
            } else {
                (0.0, 1.0)
            };
            let kernel_component = if index == 0 { u.1 } else { u.0 };
            if kernel_component.abs() > 1e-6 {
                return Err(Error::NotIdentifiable(label()));
            }
            let ui = if index == 0 { u.0 } else { u.1 };
            Ok((ui * ui / lmax, f64::INFINITY, true))
        }
        n => Err(Error::SizeMismatch { expected: 2, actual: n }),
    }
}

/// `delta = sqrt((F^-1)_ii / k)`.
pub fn crb_bound(f: &FisherMatrix, parameter: &str, repetitions: u64) -> Result<PrecisionBound> {
    let index = f
        .index_of(parameter)
        .ok_or_else(|| Error::NotIdentifiable(parameter.to_string()))?;
    if repetitions == 0 {
        return Err(Error::InvalidParameter {
            name: "repetitions",
            value: 0.0,
            reason: "must be positive",
        });
    }
    let (inv, condition_number, pseudo_inverse) = inverse_diagonal(f, index)?;
    Ok(PrecisionBound {
        label: parameter.to_string(),
        value: (inv / repetitions as f64).sqrt(),
        repetitions,
        condition_number,
        pseudo_inverse,
    })
}
