//! Helpers shared by the integration tests: an explicit operator pipeline that
//! does not go through the pulled-back generator shortcut, plus property checks
//! reused by the acceptance runner.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use phaseref::estimation::CountingModel;
use phaseref::fisher::{derivative_state, qfim_pure, FisherMatrix};
use phaseref::fock::{CutoffPolicy, DensityOperator, FockSpace, FockVector, ModeOperator};
use phaseref::interferometer::{auto_cutoffs, basis_fisher, prepare, scalar_metric, Setup};
use phaseref::optics::{beam_splitter, loss_channel, GeneratorConvention, LossModel, QuadraticGenerator};
use phaseref::states::{dephase_density, interferometer_input, InputParams, MODE_A, MODE_B};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rel(value: f64, expected: f64) -> f64 {
    if expected == 0.0 {
        value.abs()
    } else {
        (value / expected - 1.0).abs()
    }
}

/// `B_tau |psi_in>` from explicit operators at the auto cutoff of `policy`.
pub fn explicit_state(params: &InputParams, tau: f64, policy: &CutoffPolicy) -> FockVector {
    let space = auto_cutoffs(params, policy).unwrap().space();
    let psi = interferometer_input(params, &space).unwrap().normalized();
    beam_splitter(tau, &space, (MODE_A, MODE_B)).unwrap().apply(&psi).unwrap()
}

pub fn generators(convention: GeneratorConvention, space: &FockSpace) -> Vec<ModeOperator> {
    QuadraticGenerator::for_convention(convention, space.mode_count())
        .iter()
        .map(|g| g.to_mode_operator(space).unwrap())
        .collect()
}

/// Pure-state QFI matrix of `psi` for the generators of `convention`.
pub fn explicit_qfim(psi: &FockVector, convention: GeneratorConvention) -> FisherMatrix {
    let d: Vec<FockVector> = generators(convention, psi.space())
        .iter()
        .map(|g| derivative_state(psi, g).unwrap())
        .collect();
    qfim_pure(psi, &d).unwrap()
}

pub fn diagonal_operator(space: &FockSpace, f: impl Fn(&[usize]) -> f64) -> ModeOperator {
    let d = space.dimension();
    let diag = DVector::from_iterator(d, (0..d).map(|i| c(f(&space.occupation(i)), 0.0)));
    ModeOperator::new(space.clone(), phaseref::fock::OperatorRepr::Diagonal(diag), false).unwrap()
}

/// Random density matrix of rank `rank` from a deterministic seed.
pub fn random_density(space: &FockSpace, rank: usize, seed: u64) -> DensityOperator {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = space.dimension();
    let y = DMatrix::from_fn(d, rank, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let mut m = &y * y.adjoint();
    let tr = m.trace().re;
    m /= c(tr, 0.0);
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    DensityOperator::new(space.clone(), m).unwrap()
}

/// Counting CFI never exceeds the averaged-state QFI at the same `tau` and loss.
pub fn cfi_below_qfi(alpha: f64, r: f64, tau: f64, eta: f64, phi: f64) -> Result<(), String> {
    let setup = Setup::new(InputParams::new(alpha, r)).with_eta(eta);
    let input = prepare(&setup).map_err(|e| e.to_string())?;
    let qfi = scalar_metric(&basis_fisher(&input, true).unwrap().matrix, tau, GeneratorConvention::UpperOnly).unwrap();
    let cfi = CountingModel::from_input(&input, tau, GeneratorConvention::UpperOnly)
        .unwrap()
        .fisher(phi)
        .unwrap();
    if cfi <= qfi * (1.0 + 1e-8) + 1e-8 {
        Ok(())
    } else {
        Err(format!("cfi {cfi} > qfi {qfi} at alpha={alpha} r={r} tau={tau} eta={eta} phi={phi}"))
    }
}

pub const ETA_GRID: [f64; 5] = [1.0, 0.9, 0.8, 0.7, 0.6];

/// Averaged-state and pure-state QFI strictly decrease along [`ETA_GRID`].
pub fn loss_monotone(alpha: f64, r: f64, tau: f64) -> Result<(), String> {
    for dephased in [true, false] {
        let values: Vec<f64> = ETA_GRID
            .iter()
            .map(|&eta| {
                let input = prepare(&Setup::new(InputParams::new(alpha, r)).with_eta(eta)).unwrap();
                scalar_metric(&basis_fisher(&input, dephased).unwrap().matrix, tau, GeneratorConvention::UpperOnly).unwrap()
            })
            .collect();
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(format!("not strictly decreasing (dephased={dephased}): {values:?}"));
        }
    }
    Ok(())
}

/// `loss(eta1) o loss(eta2) = loss(eta1 eta2)` on a random two-mode state.
pub fn loss_semigroup(eta1: f64, eta2: f64, seed: u64) -> Result<(), String> {
    let space = FockSpace::uniform(2, 4).unwrap();
    let rho = random_density(&space, 3, seed);
    let twice = loss_channel(
        &loss_channel(&rho, &LossModel::arms(eta2).unwrap()).unwrap(),
        &LossModel::arms(eta1).unwrap(),
    )
    .unwrap();
    let once = loss_channel(&rho, &LossModel::arms(eta1 * eta2).unwrap()).unwrap();
    let dev = twice.max_abs_diff(&once);
    if dev <= 1e-10 {
        Ok(())
    } else {
        Err(format!("semigroup deviation {dev:e}"))
    }
}

/// Beam splitter is unitary and conserves the total photon number.
pub fn beam_splitter_unitary(tau: f64, cutoff: usize) -> Result<(), String> {
    let space = FockSpace::uniform(2, cutoff).unwrap();
    let b = beam_splitter(tau, &space, (MODE_A, MODE_B)).unwrap();
    let dev = b.unitarity_deviation();
    if dev > 1e-10 {
        return Err(format!("unitarity deviation {dev:e}"));
    }
    let dense = b.to_dense();
    let total = space.total_number_table(&[MODE_A, MODE_B]);
    for i in 0..space.dimension() {
        for j in 0..space.dimension() {
            if total[i] != total[j] && dense[(i, j)].norm() > 1e-14 {
                return Err(format!("couples N={} to N={}", total[j], total[i]));
            }
        }
    }
    Ok(())
}

/// Loss, dephasing and beam-splitter conjugation keep the trace and Hermiticity.
pub fn channels_preserve_trace(eta: f64, tau: f64, seed: u64) -> Result<(), String> {
    let space = FockSpace::uniform(2, 4).unwrap();
    let rho = random_density(&space, 4, seed);
    let lossy = loss_channel(&rho, &LossModel::arms(eta).unwrap()).unwrap();
    let dephased = dephase_density(&lossy, &[MODE_A, MODE_B]).unwrap();
    let mixed = beam_splitter(tau, &space, (MODE_A, MODE_B)).unwrap().conjugate(&dephased).unwrap();
    for (name, s) in [("loss", &lossy), ("dephase", &dephased), ("beam splitter", &mixed)] {
        if (s.trace() - 1.0).abs() > 1e-12 {
            return Err(format!("{name}: trace {}", s.trace()));
        }
        if s.hermiticity_deviation() > 1e-12 {
            return Err(format!("{name}: hermiticity {:e}", s.hermiticity_deviation()));
        }
        if s.eigenvalues().iter().any(|&l| l < -1e-10) {
            return Err(format!("{name}: negative eigenvalue"));
        }
    }
    Ok(())
}

/// Largest entry modulus of a complex array.
pub fn max_norm<'a>(entries: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    entries.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}
