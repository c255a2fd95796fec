//! Full interferometer: input preparation, cutoff sizing and the information
//! metrics of each phase-reference model.
//!
//! Equal loss on both arms commutes with the beam splitter and the phase
//! shift, and common-phase averaging commutes with both as well. The state is
//! therefore prepared as `loss(|r><r|) (x) |sqrt(eta) alpha>` and the phase
//! generators are pulled back through the first beam splitter,
//! `G -> B^dag G B`. All QFI values at every `tau` then follow from one 4x4
//! matrix over a real basis of pair generators.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fisher::{inverse_diagonal, to_plus_minus, FisherMatrix};
use crate::fock::{CutoffPolicy, FockSpace};
use crate::optics::{beam_splitter_mode_matrix, loss_kraus_coefficients, GeneratorConvention, QuadraticGenerator};
use crate::spectral::{contract, qfim_ensemble, Ensemble, SpectralReport};
use crate::states::{
    auto_cutoff_pair, auto_cutoff_reference, coherent_amplitudes, product_amplitudes, squeezed_amplitudes,
    InputParams, MODE_A, MODE_B, MODE_REF,
};

/// Eigenvalues of the lossy squeezed vacuum below this fraction of the largest are dropped.
pub const ENSEMBLE_CUT: f64 = 1e-15;

/// Physical setup apart from the beam-splitter transmission.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Setup {
    pub params: InputParams,
    /// Power transmission of each interferometer arm.
    pub eta: f64,
    /// Subject the reference beam to the same loss.
    pub reference_lossy: bool,
    pub policy: CutoffPolicy,
}

impl Setup {
    pub fn new(params: InputParams) -> Self {
        Self {
            params,
            eta: 1.0,
            reference_lossy: false,
            policy: CutoffPolicy::default(),
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Cutoffs {
    /// Shared cutoff of modes `a` and `b`.
    pub pair: usize,
    pub reference: Option<usize>,
}

impl Cutoffs {
    pub fn space(&self) -> FockSpace {
        let mut c = vec![self.pair, self.pair];
        if let Some(r) = self.reference {
            c.push(r);
        }
        FockSpace::new(c).expect("nonempty mode list")
    }
}

pub fn auto_cutoffs(params: &InputParams, policy: &CutoffPolicy) -> Result<Cutoffs> {
    let pair = auto_cutoff_pair(params.effective_alpha(), params.effective_r(), policy)?;
    let reference = params.beta.map(|b| auto_cutoff_reference(b, policy)).transpose()?;
    Ok(Cutoffs { pair, reference })
}

/// Input state after loss, before the first beam splitter.
#[derive(Clone, Debug)]
pub struct PreparedInput {
    pub ensemble: Ensemble,
    pub cutoffs: Cutoffs,
    /// `1 - <psi_in|psi_in>` of the truncated pure input.
    pub truncation_deficit: f64,
    /// Weight of lossy-squeezed eigenvalues dropped below [`ENSEMBLE_CUT`].
    pub discarded_weight: f64,
}

/// Weighted pure states `(weight, amplitudes)`.
pub type WeightedStates = Vec<(f64, Vec<Complex64>)>;

/// Eigen-ensemble of single-mode pure loss applied to `amps`, plus the discarded weight.
pub fn lossy_ensemble(amps: &[Complex64], eta: f64) -> Result<(WeightedStates, f64)> {
    if eta == 1.0 {
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let unit = amps.iter().map(|z| z / norm.sqrt()).collect();
        return Ok((vec![(norm, unit)], 0.0));
    }
    let c = amps.len() - 1;
    let coeff = loss_kraus_coefficients(eta, c);
    let mut sigma = DMatrix::<Complex64>::zeros(c + 1, c + 1);
    for (k, row) in coeff.iter().enumerate() {
        let v: Vec<Complex64> = (0..=c)
            .map(|m| if m + k <= c { amps[m + k] * row[m + k] } else { Complex64::new(0.0, 0.0) })
            .collect();
        for i in 0..=c {
            if v[i] == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..=c {
                sigma[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    let (values, vectors) = crate::linalg::hermitian_eigen(&sigma)?;
    let max = values.max();
    let mut out = Vec::new();
    let mut dropped = 0.0;
    let mut order: Vec<usize> = (0..=c).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    for i in order {
        let mu = values[i];
        if mu > ENSEMBLE_CUT * max {
            out.push((mu, vectors.column(i).iter().copied().collect()));
        } else {
            dropped += mu.max(0.0);
        }
    }
    Ok((out, dropped))
}

/// Builds the lossy input ensemble at the given cutoffs.
pub fn prepare_with_cutoffs(setup: &Setup, cutoffs: Cutoffs) -> Result<PreparedInput> {
    let p = &setup.params;
    if !(0.0..=1.0).contains(&setup.eta) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: setup.eta,
            reason: "must lie in [0, 1]",
        });
    }
    if p.beta.is_some() != cutoffs.reference.is_some() {
        return Err(Error::SizeMismatch {
            expected: p.mode_count(),
            actual: cutoffs.space().mode_count(),
        });
    }
    let space = cutoffs.space();
    let amp = setup.eta.sqrt();
    let squeezed = squeezed_amplitudes(p.effective_r(), cutoffs.pair);
    let coherent = coherent_amplitudes(p.effective_alpha() * amp, cutoffs.pair);
    let reference = match (p.beta, cutoffs.reference) {
        (Some(b), Some(c)) => {
            let scale = if setup.reference_lossy { amp } else { 1.0 };
            Some(coherent_amplitudes(b * scale, c))
        }
        _ => None,
    };
    let pure_norm = squeezed.iter().map(|z| z.norm_sqr()).sum::<f64>()
        * coherent_amplitudes(p.effective_alpha(), cutoffs.pair)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
        * match (p.beta, cutoffs.reference) {
            (Some(b), Some(c)) => coherent_amplitudes(b, c).iter().map(|z| z.norm_sqr()).sum::<f64>(),
            _ => 1.0,
        };

    let (members, discarded_weight) = lossy_ensemble(&squeezed, setup.eta)?;
    let mut columns = DMatrix::zeros(space.dimension(), members.len());
    for (k, (mu, vec)) in members.iter().enumerate() {
        let scaled: Vec<Complex64> = vec.iter().map(|z| z * mu.sqrt()).collect();
        let mut factors = vec![Vec::new(); space.mode_count()];
        factors[p.squeezed_mode()] = scaled;
        factors[p.coherent_mode()] = coherent.clone();
        if let Some(r) = &reference {
            factors[MODE_REF] = r.clone();
        }
        columns.set_column(k, &product_amplitudes(&factors));
    }
    Ok(PreparedInput {
        ensemble: Ensemble::new(space, columns)?,
        cutoffs,
        truncation_deficit: 1.0 - pure_norm,
        discarded_weight,
    })
}

pub fn prepare(setup: &Setup) -> Result<PreparedInput> {
    let cutoffs = auto_cutoffs(&setup.params, &setup.policy)?;
    prepare_with_cutoffs(setup, cutoffs)
}

/// QFI matrix of the prepared state over [`QuadraticGenerator::pair_basis`].
/// With `dephased`, the state is first averaged over a common phase of all its modes
/// (interferometer modes and, when present, the reference).
pub fn basis_fisher(input: &PreparedInput, dephased: bool) -> Result<SpectralReport> {
    let space = input.ensemble.space();
    let modes: Vec<usize> = (0..space.mode_count()).collect();
    let basis = QuadraticGenerator::pair_basis(space.mode_count());
    qfim_ensemble(&input.ensemble, &basis, dephased.then_some(&modes[..]))
}

/// Pair-basis coordinates of `B_tau^dag G B_tau` for each generator of `convention`.
pub fn pulled_back_coordinates(tau: f64, convention: GeneratorConvention) -> Result<Vec<[f64; 4]>> {
    let s = beam_splitter_mode_matrix(tau, 2, (MODE_A, MODE_B))?;
    Ok(QuadraticGenerator::for_convention(convention, 2)
        .iter()
        .map(|g| g.transformed(&s).pair_coordinates().expect("pair generator"))
        .collect())
}

/// Fisher matrix at transmission `tau` from a basis QFI matrix.
pub fn fisher_at(basis: &DMatrix<f64>, tau: f64, convention: GeneratorConvention) -> Result<FisherMatrix> {
    let coords = pulled_back_coordinates(tau, convention)?;
    let m = contract(basis, &coords);
    let labels = if coords.len() == 1 {
        vec!["phi".to_string()]
    } else {
        vec!["phi1".to_string(), "phi2".to_string()]
    };
    FisherMatrix::new(labels, m)
}

/// Effective scalar information for the phase difference:
/// `F` for single-phase conventions, `1 / (F^-1)_{--}` for two phases.
pub fn scalar_metric(basis: &DMatrix<f64>, tau: f64, convention: GeneratorConvention) -> Result<f64> {
    let f = fisher_at(basis, tau, convention)?;
    if f.dim() == 1 {
        return Ok(f.value());
    }
    let pm = to_plus_minus(&f)?;
    match inverse_diagonal(&pm, 1) {
        Ok((inv, _, _)) => Ok(1.0 / inv),
        Err(Error::NotIdentifiable(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{derivative_density, qfim_mixed};
    use crate::optics::{beam_splitter, loss_channel, LossModel};
    use crate::states::dephase_density;

    #[test]
    fn pulled_back_generators_match_explicit_pipeline() {
        // dense oracle: rho_in -> loss -> B_tau -> (dephase) -> generators after the splitter
        let params = InputParams::new(0.6, 0.2);
        let cut = Cutoffs { pair: 18, reference: None };
        let space = cut.space();
        let psi = crate::states::interferometer_input_truncated(&params, &space).unwrap();
        // drop clipped sectors so the truncated splitter is exact
        let totals = space.total_number_table(&[0, 1]);
        let amps: Vec<Complex64> = psi
            .amplitudes()
            .iter()
            .zip(&totals)
            .map(|(z, &n)| if n <= cut.pair { *z } else { Complex64::new(0.0, 0.0) })
            .collect();
        let psi = crate::fock::FockVector::from_vec(space.clone(), amps).unwrap().normalized();
        let rho_in = psi.projector();
        for &(eta, tau, dephased) in &[(1.0, 0.3, false), (0.7, 0.45, true), (0.8, 0.62, false), (0.9, 0.5, true)] {
            let lossy = loss_channel(&rho_in, &LossModel::arms(eta).unwrap()).unwrap();
            let bs = beam_splitter(tau, &space, (0, 1)).unwrap();
            let mut rho = bs.conjugate(&lossy).unwrap();
            if dephased {
                rho = dephase_density(&rho, &[0, 1]).unwrap();
            }
            let gens = QuadraticGenerator::for_convention(GeneratorConvention::TwoParam, 2);
            let drho: Vec<_> = gens
                .iter()
                .map(|g| derivative_density(&rho, &g.to_mode_operator(&space).unwrap()).unwrap())
                .collect();
            let dense = qfim_mixed(&rho, &drho).unwrap();

            let prepared = prepare_with_cutoffs(&Setup::new(params).with_eta(eta), cut).unwrap();
            let basis = basis_fisher(&prepared, dephased).unwrap().matrix;
            let fast = fisher_at(&basis, tau, GeneratorConvention::TwoParam).unwrap();
            assert!(
                (fast.matrix() - dense.matrix()).amax() < 1e-8,
                "eta {eta} tau {tau}: {} vs {}",
                fast.matrix(),
                dense.matrix()
            );
        }
    }

    #[test]
    fn lossless_ensemble_is_the_pure_input() {
        let setup = Setup::new(InputParams::new(1.0, 0.3));
        let p = prepare(&setup).unwrap();
        assert_eq!(p.ensemble.rank(), 1);
        assert!(p.truncation_deficit < 1e-10);
        assert!((p.ensemble.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lossy_ensemble_preserves_trace() {
        let amps = squeezed_amplitudes(Complex64::new(0.8, 0.0), 60);
        let (members, dropped) = lossy_ensemble(&amps, 0.8).unwrap();
        let total: f64 = members.iter().map(|m| m.0).sum::<f64>() + dropped;
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        assert!((total - norm).abs() < 1e-12);
        assert!(members.len() < 40);
    }
}
