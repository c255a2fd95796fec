//! Maximization of a model's information metric over `tau` and the squeezing
//! fraction `f = sinh^2 r / nbar` at fixed mean photon number.
//!
//! Procedure (fixed for reproducibility): a 41 x 41 grid over `[0, 1]^2`, then
//! alternating golden-section searches in each coordinate, bracketed by one
//! grid step around the current point, until neither coordinate moves by more
//! than `1e-6`. Near-ties favour `tau = 1/2`, then smaller `f`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{golden_max, CountingModel};
use crate::interferometer::{basis_fisher, prepare, scalar_metric, Cutoffs, PreparedInput, Setup};
use crate::optics::GeneratorConvention;

use super::config::{Model, ScenarioConfig};

pub const GRID_POINTS: usize = 41;
pub const PARAMETER_TOLERANCE: f64 = 1e-6;
/// Relative metric difference treated as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;
const MAX_CYCLES: usize = 50;

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Optimum {
    pub model: Model,
    pub nbar: f64,
    pub tau: f64,
    /// Squeezing fraction `sinh^2 r / nbar`.
    pub fraction: f64,
    pub metric: f64,
    pub cutoffs: Cutoffs,
    pub truncation_deficit: f64,
}

impl Optimum {
    pub fn alpha_sq(&self) -> f64 {
        (1.0 - self.fraction) * self.nbar
    }

    pub fn sinh2_r(&self) -> f64 {
        self.fraction * self.nbar
    }
}

/// Precomputed state information at one squeezing fraction.
#[derive(Clone, Debug)]
pub struct StatePoint {
    pub cutoffs: Cutoffs,
    pub truncation_deficit: f64,
    /// Pair-basis QFI matrix (absent for counting models).
    pub basis: Option<DMatrix<f64>>,
    /// Prepared input (kept for counting models only).
    pub input: Option<Arc<PreparedInput>>,
}

/// Evaluates a model's metric at `(tau, f)`, caching per-`f` state data.
pub struct Evaluator<'a> {
    cfg: &'a ScenarioConfig,
    model: Model,
    nbar: f64,
    cache: Mutex<HashMap<u64, Arc<StatePoint>>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(cfg: &'a ScenarioConfig, model: Model, nbar: f64) -> Result<Self> {
        if !(nbar.is_finite() && nbar > 0.0) {
            return Err(Error::InvalidParameter {
                name: "nbar",
                value: nbar,
                reason: "must be positive and finite",
            });
        }
        if model == Model::QfimFiniteBeta && cfg.beta.is_none() {
            return Err(Error::Config("QFIM_FINITE_BETA needs beta".into()));
        }
        Ok(Self {
            cfg,
            model,
            nbar,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn setup(&self, fraction: f64) -> Setup {
        let beta = (self.model == Model::QfimFiniteBeta).then(|| self.cfg.beta.unwrap_or(0.0));
        let mut s = Setup::new(self.cfg.input_params(self.nbar, fraction, beta)).with_eta(self.cfg.eta);
        s.reference_lossy = self.cfg.reference_lossy;
        s.policy = self.cfg.policy();
        s
    }

    fn dephased(&self) -> bool {
        matches!(self.model, Model::FqRho | Model::QfimFiniteBeta)
    }

    pub fn point(&self, fraction: f64) -> Result<Arc<StatePoint>> {
        let key = fraction.to_bits();
        if let Some(p) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(p));
        }
        let input = prepare(&self.setup(fraction))?;
        let point = if self.model.is_counting() {
            StatePoint {
                cutoffs: input.cutoffs,
                truncation_deficit: input.truncation_deficit,
                basis: None,
                input: Some(Arc::new(input)),
            }
        } else {
            let basis = basis_fisher(&input, self.dephased())?.matrix;
            StatePoint {
                cutoffs: input.cutoffs,
                truncation_deficit: input.truncation_deficit,
                basis: Some(basis),
                input: None,
            }
        };
        let point = Arc::new(point);
        let mut cache = self.cache.lock().expect("cache lock");
        if self.model.is_counting() {
            // ensembles can be large; keep only the latest one
            cache.clear();
        }
        cache.insert(key, Arc::clone(&point));
        Ok(point)
    }

    pub fn metric(&self, tau: f64, fraction: f64) -> Result<f64> {
        let point = self.point(fraction)?;
        let value = match self.model {
            Model::FqI => scalar_metric(point.basis.as_ref().expect("basis"), tau, GeneratorConvention::UpperOnly)?,
            Model::FqIi => scalar_metric(point.basis.as_ref().expect("basis"), tau, GeneratorConvention::Symmetric)?,
            Model::FqRho => scalar_metric(point.basis.as_ref().expect("basis"), tau, GeneratorConvention::UpperOnly)?,
            Model::QfimExternalRef | Model::QfimFiniteBeta => {
                scalar_metric(point.basis.as_ref().expect("basis"), tau, GeneratorConvention::TwoParam)?
            }
            Model::CfiPhotonCounting | Model::McSaturation => {
                let input = point.input.as_ref().expect("input");
                CountingModel::from_input(input, tau, self.cfg.counting_convention)?.fisher(self.cfg.phi)?
            }
        };
        if !value.is_finite() {
            return Err(Error::NonFinite {
                value,
                tau,
                fraction,
            });
        }
        Ok(value)
    }
}

fn grid() -> Vec<f64> {
    (0..GRID_POINTS).map(|i| i as f64 / (GRID_POINTS - 1) as f64).collect()
}

fn is_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Golden-section refinement of one coordinate around `x0` (value `v0`).
fn refine(mut g: impl FnMut(f64) -> Result<f64>, x0: f64, v0: f64) -> Result<(f64, f64)> {
    let h = 1.0 / (GRID_POINTS - 1) as f64;
    let (lo, hi) = ((x0 - h).max(0.0), (x0 + h).min(1.0));
    let mut err = None;
    let x = golden_max(
        |x| match g(x) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        PARAMETER_TOLERANCE,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let mut best = (x0, v0);
    for c in [x, lo, hi] {
        let v = g(c)?;
        if v > best.1 && !is_tie(v, best.1) {
            best = (c, v);
        }
    }
    Ok(best)
}

/// Maximizes the metric of `model` at photon number `nbar`. `tau` and the
/// squeezing fraction are held fixed when the config overrides them.
pub fn optimize_inputs(cfg: &ScenarioConfig, model: Model, nbar: f64) -> Result<Optimum> {
    let ev = Evaluator::new(cfg, model, nbar)?;
    let tau_fixed = cfg.tau;
    let f_fixed = cfg.fixed_fraction(nbar);
    let taus = tau_fixed.map_or_else(grid, |t| vec![t]);
    let fs = f_fixed.map_or_else(grid, |f| vec![f]);

    let values: Vec<Vec<f64>> = fs
        .par_iter()
        .map(|&f| taus.iter().map(|&t| ev.metric(t, f)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;

    let max = values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut start = None;
    for (fi, row) in values.iter().enumerate() {
        for (ti, &v) in row.iter().enumerate() {
            if !is_tie(v, max) {
                continue;
            }
            let key = ((taus[ti] - 0.5).abs(), fs[fi]);
            let better = match start {
                None => true,
                Some((k, _, _, _)) => key < k,
            };
            if better {
                start = Some((key, taus[ti], fs[fi], v));
            }
        }
    }
    let (_, mut tau, mut f, mut best) = start.expect("grid is nonempty");

    for _ in 0..MAX_CYCLES {
        let (t0, f0) = (tau, f);
        if tau_fixed.is_none() {
            (tau, best) = refine(|x| ev.metric(x, f), tau, best)?;
        }
        if f_fixed.is_none() {
            (f, best) = refine(|x| ev.metric(tau, x), f, best)?;
        }
        if (tau - t0).abs() < PARAMETER_TOLERANCE && (f - f0).abs() < PARAMETER_TOLERANCE {
            break;
        }
    }
    if tau_fixed.is_none() && tau != 0.5 {
        let v = ev.metric(0.5, f)?;
        if v >= best || is_tie(v, best) {
            tau = 0.5;
            best = v;
        }
    }
    let point = ev.point(f)?;
    Ok(Optimum {
        model,
        nbar,
        tau,
        fraction: f,
        metric: best,
        cutoffs: point.cutoffs,
        truncation_deficit: point.truncation_deficit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaged_qfi_peaks_at_balanced_splitter() {
        let o = optimize_inputs(&ScenarioConfig::new(Model::FqRho, 0.5), Model::FqRho, 0.5).unwrap();
        assert_eq!(o.tau, 0.5);
        assert!(o.metric > 0.5);
    }

    #[test]
    fn coherent_only_upper_phase_prefers_full_transmission() {
        let mut cfg = ScenarioConfig::new(Model::FqI, 1.5);
        cfg.r = Some(0.0);
        let o = optimize_inputs(&cfg, Model::FqI, 1.5).unwrap();
        assert!((o.tau - 1.0).abs() < 1e-6, "tau* = {}", o.tau);
        assert!((o.metric - 6.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_overrides_are_respected() {
        let mut cfg = ScenarioConfig::new(Model::FqRho, 1.0);
        cfg.tau = Some(0.3);
        cfg.alpha_fraction = Some(1.0);
        let o = optimize_inputs(&cfg, Model::FqRho, 1.0).unwrap();
        assert_eq!((o.tau, o.fraction), (0.3, 0.0));
        assert!((o.metric - 0.84).abs() < 1e-8);
    }
}
