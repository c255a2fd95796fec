//! Sweeps over photon numbers and models, the finite-reference study and the
//! Monte Carlo saturation report.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{run_trials, CountingModel};
use crate::interferometer::{basis_fisher, prepare, scalar_metric, Cutoffs};
use crate::optics::GeneratorConvention;

use super::config::{Model, ScenarioConfig};
use super::optimize::{optimize_inputs, Evaluator, Optimum};

/// Relative slack of the monotonicity check in the reference-beam study.
pub const MONOTONE_SLACK: f64 = 1e-8;

/// One output row. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub model: Model,
    pub nbar: f64,
    pub tau: Option<f64>,
    pub alpha_sq: Option<f64>,
    pub sinh2_r: Option<f64>,
    /// Information for the phase difference (`F`, or `1/(F^-1)_{--}`).
    pub metric: Option<f64>,
    /// Single-shot bound `metric^{-1/2}`.
    pub delta_phi: Option<f64>,
    pub eta: f64,
    pub beta: Option<f64>,
    /// Cutoff of the interferometer modes.
    pub cutoff: Option<usize>,
    pub truncation_deficit: Option<f64>,
    pub wall_time_s: f64,
    /// `ok`, or an error tag.
    pub status: String,
}

impl SweepRow {
    pub const HEADER: [&'static str; 13] = [
        "model",
        "nbar",
        "tau",
        "alpha_sq",
        "sinh2_r",
        "metric",
        "delta_phi",
        "eta",
        "beta",
        "cutoff",
        "truncation_deficit",
        "wall_time_s",
        "status",
    ];

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(model: Model, nbar: f64, cfg: &ScenarioConfig, beta: Option<f64>, err: &Error, start: Instant) -> Self {
        Self {
            model,
            nbar,
            tau: None,
            alpha_sq: None,
            sinh2_r: None,
            metric: None,
            delta_phi: None,
            eta: cfg.eta,
            beta,
            cutoff: None,
            truncation_deficit: None,
            wall_time_s: start.elapsed().as_secs_f64(),
            status: format!("error: {err}"),
        }
    }

    fn from_metric(opt: &Optimum, metric: f64, cfg: &ScenarioConfig, beta: Option<f64>, start: Instant) -> Self {
        let ok = metric.is_finite() && metric > 0.0;
        Self {
            model: opt.model,
            nbar: opt.nbar,
            tau: Some(opt.tau),
            alpha_sq: Some(opt.alpha_sq()),
            sinh2_r: Some(opt.sinh2_r()),
            metric: Some(metric),
            delta_phi: ok.then(|| 1.0 / metric.sqrt()),
            eta: cfg.eta,
            beta,
            cutoff: Some(opt.cutoffs.pair),
            truncation_deficit: Some(opt.truncation_deficit),
            wall_time_s: start.elapsed().as_secs_f64(),
            status: if ok { "ok".into() } else { "error: phase difference not identifiable".into() },
        }
    }
}

/// Rows plus the cutoffs actually used (the reference cutoff does not fit the CSV).
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub cutoffs: Vec<Option<Cutoffs>>,
}

impl SweepResult {
    pub fn failures(&self) -> impl Iterator<Item = (usize, &SweepRow)> {
        self.rows.iter().enumerate().filter(|(_, r)| !r.is_ok())
    }
}

fn beta_of(model: Model, cfg: &ScenarioConfig) -> Option<f64> {
    (model == Model::QfimFiniteBeta).then(|| cfg.beta.unwrap_or(0.0))
}

fn sweep_row(cfg: &ScenarioConfig, model: Model, nbar: f64) -> (SweepRow, Option<Cutoffs>) {
    let start = Instant::now();
    let beta = beta_of(model, cfg);
    let result = (|| -> Result<(SweepRow, Cutoffs)> {
        if model == Model::McSaturation {
            let report = mc_point(cfg, nbar)?;
            let opt = &report.optimum;
            let metric = 1.0 / (report.run_variance * cfg.repetitions as f64);
            return Ok((SweepRow::from_metric(opt, metric, cfg, beta, start), opt.cutoffs));
        }
        let opt = optimize_inputs(cfg, model, nbar)?;
        Ok((SweepRow::from_metric(&opt, opt.metric, cfg, beta, start), opt.cutoffs))
    })();
    match result {
        Ok((row, c)) => (row, Some(c)),
        Err(e) => (SweepRow::failed(model, nbar, cfg, beta, &e, start), None),
    }
}

/// One row per `(model, nbar)`, models in config order, photon numbers in grid
/// order. Rows are evaluated in parallel; failures are recorded in-row.
pub fn sweep(cfg: &ScenarioConfig) -> SweepResult {
    let jobs: Vec<(Model, f64)> = cfg
        .model
        .iter()
        .flat_map(|&m| cfg.nbar.iter().map(move |&n| (m, n)))
        .collect();
    let (rows, cutoffs) = jobs.par_iter().map(|&(m, n)| sweep_row(cfg, m, n)).unzip();
    SweepResult { rows, cutoffs }
}

/// Finite-reference study at one photon number.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceBeamStudy {
    pub nbar: f64,
    /// Interferometer parameters shared by every row (external-reference optimum
    /// unless overridden).
    pub optimum: Optimum,
    pub rows: Vec<SweepRow>,
    pub cutoffs: Vec<Option<Cutoffs>>,
    /// Two-mode averaged-state bound at the same parameters.
    pub rho_delta_phi: f64,
    /// Perfect-reference bound at the same parameters.
    pub external_delta_phi: f64,
    pub non_increasing: bool,
    /// Largest relative increase of `delta_phi` between consecutive rows.
    pub max_increase: f64,
    /// `delta_phi(last) / external_delta_phi - 1`.
    pub final_gap: f64,
}

/// `delta_phi_-(|beta|)` from the averaged three-mode state at the parameters
/// that optimize the perfect-reference bound.
pub fn reference_beam_study(cfg: &ScenarioConfig, nbar: f64) -> Result<ReferenceBeamStudy> {
    let grid = cfg
        .beta_grid
        .clone()
        .ok_or_else(|| Error::Config("reference-beam study needs beta_grid".into()))?;
    let optimum = optimize_inputs(cfg, Model::QfimExternalRef, nbar)?;
    let ext = Evaluator::new(cfg, Model::QfimExternalRef, nbar)?;
    let external_delta_phi = 1.0 / ext.metric(optimum.tau, optimum.fraction)?.sqrt();
    let rho = Evaluator::new(cfg, Model::FqRho, nbar)?;
    let rho_delta_phi = 1.0 / rho.metric(optimum.tau, optimum.fraction)?.sqrt();

    let (rows, cutoffs): (Vec<SweepRow>, Vec<Option<Cutoffs>>) = grid
        .par_iter()
        .map(|&b| {
            let start = Instant::now();
            let mut c = cfg.clone();
            c.beta = Some(b);
            let result = (|| -> Result<(SweepRow, Cutoffs)> {
                let ev = Evaluator::new(&c, Model::QfimFiniteBeta, nbar)?;
                let metric = ev.metric(optimum.tau, optimum.fraction)?;
                let point = ev.point(optimum.fraction)?;
                let opt = Optimum {
                    model: Model::QfimFiniteBeta,
                    cutoffs: point.cutoffs,
                    truncation_deficit: point.truncation_deficit,
                    metric,
                    ..optimum.clone()
                };
                Ok((SweepRow::from_metric(&opt, metric, &c, Some(b), start), point.cutoffs))
            })();
            match result {
                Ok((row, cut)) => (row, Some(cut)),
                Err(e) => (SweepRow::failed(Model::QfimFiniteBeta, nbar, &c, Some(b), &e, start), None),
            }
        })
        .unzip();

    let deltas: Vec<f64> = rows.iter().filter_map(|r| r.delta_phi).collect();
    let max_increase = deltas
        .windows(2)
        .map(|w| w[1] / w[0] - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_increase = if deltas.len() < 2 { 0.0 } else { max_increase };
    let final_gap = deltas.last().map_or(f64::NAN, |d| d / external_delta_phi - 1.0);
    Ok(ReferenceBeamStudy {
        nbar,
        optimum,
        rows,
        cutoffs,
        rho_delta_phi,
        external_delta_phi,
        non_increasing: max_increase <= MONOTONE_SLACK,
        max_increase,
        final_gap,
    })
}

/// Empirical MLE spread against the classical and averaged-state quantum bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McReport {
    pub nbar: f64,
    pub tau: f64,
    pub alpha_sq: f64,
    pub sinh2_r: f64,
    /// True phase (the operating point).
    pub phi: f64,
    pub repetitions: usize,
    pub trials: usize,
    pub seed: u64,
    /// Classical Fisher information of the counting measurement at `phi`.
    pub cfi: f64,
    /// Averaged-state QFI at the same parameters.
    pub qfi_rho: f64,
    pub empirical_std: f64,
    /// `1 / sqrt(k F)`.
    pub crb_std: f64,
    /// `1 / sqrt(k F_Q)`.
    pub quantum_std: f64,
    /// `empirical_std / crb_std`.
    pub ratio: f64,
    pub bias: f64,
    /// `3 empirical_std / sqrt(trials)`.
    pub bias_limit: f64,
    pub cutoff: usize,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub optimum: Optimum,
    #[serde(skip)]
    pub run_variance: f64,
}

fn mc_point(cfg: &ScenarioConfig, nbar: f64) -> Result<McReport> {
    let start = Instant::now();
    let optimum = optimize_inputs(cfg, Model::McSaturation, nbar)?;
    let ev = Evaluator::new(cfg, Model::McSaturation, nbar)?;
    let input = prepare(&ev.setup(optimum.fraction))?;
    let model = CountingModel::from_input(&input, optimum.tau, cfg.counting_convention)?;
    let cfi = model.fisher(cfg.phi)?;
    let qfi_rho = scalar_metric(&basis_fisher(&input, true)?.matrix, optimum.tau, GeneratorConvention::UpperOnly)?;
    let run = run_trials(&model, cfg.phi, cfg.repetitions, cfg.trials, cfg.seed)?;
    let k = cfg.repetitions as f64;
    let crb_std = 1.0 / (k * cfi).sqrt();
    Ok(McReport {
        nbar,
        tau: optimum.tau,
        alpha_sq: optimum.alpha_sq(),
        sinh2_r: optimum.sinh2_r(),
        phi: cfg.phi,
        repetitions: cfg.repetitions,
        trials: cfg.trials,
        seed: cfg.seed,
        cfi,
        qfi_rho,
        empirical_std: run.std(),
        crb_std,
        quantum_std: 1.0 / (k * qfi_rho).sqrt(),
        ratio: run.std() / crb_std,
        bias: run.bias(),
        bias_limit: 3.0 * run.std() / (cfg.trials as f64).sqrt(),
        cutoff: optimum.cutoffs.pair,
        wall_time_s: start.elapsed().as_secs_f64(),
        run_variance: run.variance,
        optimum,
    })
}

/// Monte Carlo saturation check at every photon number of the config.
/// Parameters maximize the counting Fisher information unless overridden.
pub fn run_mc_saturation(cfg: &ScenarioConfig) -> Result<Vec<McReport>> {
    if !cfg.model.contains(&Model::McSaturation) {
        return Err(Error::Config("mc needs model MC_SATURATION".into()));
    }
    cfg.nbar.iter().map(|&n| mc_point(cfg, n)).collect()
}
