//! Photon counting at the interferometer output, sampling, and the local
//! maximum-likelihood phase estimator.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fisher::{classical_fisher_report, ClassicalFisherReport};
use crate::fock::{FockSpace, ModeOperator, ZERO};
use crate::interferometer::{prepare, PreparedInput, Setup};
use crate::optics::{beam_splitter, GeneratorConvention};
use crate::states::{MODE_A, MODE_B, MODE_REF};

/// Half-width of the MLE search window around the true phase (radians).
pub const MLE_WINDOW: f64 = 0.5;
/// Points of the coarse MLE grid across the window.
pub const MLE_GRID_POINTS: usize = 201;
/// Golden-section tolerance of the MLE refinement (radians).
pub const MLE_TOLERANCE: f64 = 1e-6;

/// `p(n_a, n_b | phi)` and its phase derivative, indexed like `space`.
#[derive(Clone, Debug)]
pub struct OutcomeDistribution {
    pub phi: f64,
    pub space: FockSpace,
    pub probs: Vec<f64>,
    pub dprobs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn probability(&self, na: usize, nb: usize) -> f64 {
        if na > self.space.cutoff(0) || nb > self.space.cutoff(1) {
            return 0.0;
        }
        self.probs[self.space.index(&[na, nb])]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn derivative_sum(&self) -> f64 {
        self.dprobs.iter().sum()
    }

    pub fn fisher(&self) -> Result<ClassicalFisherReport> {
        classical_fisher_report(&self.probs, &self.dprobs)
    }
}

/// Balanced photon counting after the phase shift, with everything that does
/// not depend on `phi` precomputed: `p(n|phi) = sum_k |<n|B_1/2 U_phi z_k>|^2`
/// with `z_k = B_tau y_k` over the ensemble members and reference photon numbers.
#[derive(Clone, Debug)]
pub struct CountingModel {
    space: FockSpace,
    columns: Vec<DVector<Complex64>>,
    generator: Vec<f64>,
    output: ModeOperator,
    pub tau: f64,
    pub convention: GeneratorConvention,
    pub truncation_deficit: f64,
}

impl CountingModel {
    pub fn new(setup: &Setup, tau: f64, convention: GeneratorConvention) -> Result<Self> {
        Self::from_input(&prepare(setup)?, tau, convention)
    }

    pub fn from_input(input: &PreparedInput, tau: f64, convention: GeneratorConvention) -> Result<Self> {
        if convention == GeneratorConvention::TwoParam {
            return Err(Error::Config(
                "photon counting estimates a single phase; use upper_only or symmetric".into(),
            ));
        }
        let full = input.ensemble.space();
        let c = input.cutoffs.pair;
        let space = FockSpace::uniform(2, c)?;
        let first = beam_splitter(tau, &space, (MODE_A, MODE_B))?;
        let output = beam_splitter(0.5, &space, (MODE_A, MODE_B))?;

        // Split each ensemble column into two-mode slices, one per reference photon number.
        let refs = if full.mode_count() > 2 { full.cutoff(MODE_REF) + 1 } else { 1 };
        let d = space.dimension();
        let mut columns = Vec::new();
        for y in input.ensemble.columns().column_iter() {
            for nr in 0..refs {
                let slice = DVector::from_iterator(d, (0..d).map(|i| y[i * refs + nr]));
                if slice.iter().all(|z| *z == ZERO) {
                    continue;
                }
                columns.push(first.apply_amplitudes(&slice));
            }
        }
        let na = space.occupation_table(MODE_A);
        let nb = space.occupation_table(MODE_B);
        let generator = (0..d)
            .map(|i| match convention {
                GeneratorConvention::UpperOnly => na[i] as f64,
                _ => 0.5 * (na[i] as f64 - nb[i] as f64),
            })
            .collect();
        Ok(Self {
            space,
            columns,
            generator,
            output,
            tau,
            convention,
            truncation_deficit: input.truncation_deficit,
        })
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    /// Outcome table at `phi` with its analytic derivative.
    pub fn distribution(&self, phi: f64) -> OutcomeDistribution {
        let d = self.space.dimension();
        let mut probs = vec![0.0; d];
        let mut dprobs = vec![0.0; d];
        let phases: Vec<Complex64> = self.generator.iter().map(|g| Complex64::from_polar(1.0, -phi * g)).collect();
        for z in &self.columns {
            let shifted = DVector::from_iterator(d, (0..d).map(|i| phases[i] * z[i]));
            let dshifted = DVector::from_iterator(d, (0..d).map(|i| Complex64::new(0.0, -self.generator[i]) * shifted[i]));
            let psi = self.output.apply_amplitudes(&shifted);
            let dpsi = self.output.apply_amplitudes(&dshifted);
            for i in 0..d {
                probs[i] += psi[i].norm_sqr();
                dprobs[i] += 2.0 * (psi[i].conj() * dpsi[i]).re;
            }
        }
        OutcomeDistribution {
            phi,
            space: self.space.clone(),
            probs,
            dprobs,
        }
    }

    /// Probabilities only, renormalized to the retained mass.
    pub fn probabilities(&self, phi: f64) -> Vec<f64> {
        let mut p = self.distribution(phi).probs;
        let total: f64 = p.iter().sum();
        if total > 0.0 {
            p.iter_mut().for_each(|x| *x /= total);
        }
        p
    }

    /// Classical Fisher information of the counting measurement at `phi`.
    pub fn fisher(&self, phi: f64) -> Result<f64> {
        Ok(self.distribution(phi).fisher()?.fisher.value())
    }

    /// Largest classical Fisher information over `phi` in `[0, 2 pi)`:
    /// a 128-point scan refined by golden section. Returns `(phi*, F)`.
    pub fn best_operating_point(&self) -> Result<(f64, f64)> {
        let n = 128;
        let step = std::f64::consts::TAU / n as f64;
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..n {
            let phi = i as f64 * step;
            let f = self.fisher(phi)?;
            if f > best.1 {
                best = (phi, f);
            }
        }
        let (lo, hi) = (best.0 - step, best.0 + step);
        let phi = golden_max(|x| self.fisher(x).unwrap_or(f64::NEG_INFINITY), lo, hi, 1e-9);
        let f = self.fisher(phi)?;
        Ok(if f >= best.1 { (phi, f) } else { best })
    }
}

/// Draws `k` outcomes from `probs` (normalized internally) and returns counts per outcome.
pub fn sample(probs: &[f64], k: usize, seed: u64) -> Result<Vec<u64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    sample_with(probs, k, &mut rng)
}

fn sample_with(probs: &[f64], k: usize, rng: &mut ChaCha20Rng) -> Result<Vec<u64>> {
    let weights: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Config(format!("cannot sample: {e}")))?;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..k {
        counts[dist.sample(rng)] += 1;
    }
    Ok(counts)
}

/// `sum_n counts_n ln p_n(phi)`.
pub fn log_likelihood(model: &CountingModel, counts: &[u64], phi: f64) -> f64 {
    loglik_from(&model.probabilities(phi), counts)
}

fn loglik_from(p: &[f64], counts: &[u64]) -> f64 {
    let mut acc = 0.0;
    for (&c, &pn) in counts.iter().zip(p) {
        if c == 0 {
            continue;
        }
        if pn <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += c as f64 * pn.ln();
    }
    acc
}

/// Coarse grid of the MLE search window.
pub fn mle_grid(center: f64) -> Vec<f64> {
    let step = 2.0 * MLE_WINDOW / (MLE_GRID_POINTS - 1) as f64;
    (0..MLE_GRID_POINTS).map(|i| center - MLE_WINDOW + i as f64 * step).collect()
}

/// Maximum-likelihood phase within `center +- 0.5` rad: best point of a
/// 201-point grid, then golden section on the neighbouring grid cells.
pub fn mle_estimate(model: &CountingModel, counts: &[u64], center: f64) -> Result<f64> {
    let grid = mle_grid(center);
    let tables: Vec<Vec<f64>> = grid.iter().map(|&phi| model.probabilities(phi)).collect();
    mle_with_tables(model, counts, &grid, &tables)
}

fn mle_with_tables(model: &CountingModel, counts: &[u64], grid: &[f64], tables: &[Vec<f64>]) -> Result<f64> {
    let values: Vec<f64> = tables.iter().map(|p| loglik_from(p, counts)).collect();
    let (mut best, mut best_val) = (0, f64::NEG_INFINITY);
    let mut worst = f64::INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
        worst = worst.min(v);
    }
    if !best_val.is_finite() || best_val - worst <= 1e-12 * best_val.abs().max(1.0) {
        return Err(Error::FlatLikelihood);
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let phi = golden_max(|x| log_likelihood(model, counts, x), lo, hi, MLE_TOLERANCE);
    Ok(if log_likelihood(model, counts, phi) >= best_val { phi } else { grid[best] })
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Monte Carlo trials of the local MLE.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct EstimationRun {
    pub true_phase: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub estimates: Vec<f64>,
    pub mean: f64,
    /// Unbiased sample variance of the estimates.
    pub variance: f64,
}

impl EstimationRun {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn bias(&self) -> f64 {
        self.mean - self.true_phase
    }
}

/// Runs `trials` independent experiments of `k` repetitions at `phi`.
/// Trial `t` draws from the ChaCha20 stream `t` of `seed`, so the result
/// does not depend on the thread count.
pub fn run_trials(model: &CountingModel, phi: f64, k: usize, trials: usize, seed: u64) -> Result<EstimationRun> {
    if trials < 2 || k == 0 {
        return Err(Error::Config("need at least 2 trials and k >= 1".into()));
    }
    let truth = model.probabilities(phi);
    let grid = mle_grid(phi);
    let tables: Vec<Vec<f64>> = grid.par_iter().map(|&x| model.probabilities(x)).collect();
    let estimates = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let counts = sample_with(&truth, k, &mut rng)?;
            mle_with_tables(model, &counts, &grid, &tables)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let variance = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(EstimationRun {
        true_phase: phi,
        repetitions: k,
        seed,
        estimates,
        mean,
        variance,
    })
}
