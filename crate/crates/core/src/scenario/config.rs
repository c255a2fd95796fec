//! Flat key-value scenario configuration (TOML syntax). Unknown keys are errors.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock::CutoffPolicy;
use crate::optics::GeneratorConvention;
use crate::states::InputParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Model {
    /// Pure-state QFI with the phase on mode `a` only.
    FqI,
    /// Pure-state QFI with the phase split symmetrically.
    FqIi,
    /// QFI of the common-phase-averaged state.
    FqRho,
    /// Two-phase QFI matrix against a perfect external reference.
    QfimExternalRef,
    /// Two-phase QFI matrix of the averaged three-mode state with a finite reference beam.
    QfimFiniteBeta,
    /// Classical Fisher information of balanced photon counting.
    CfiPhotonCounting,
    /// Monte Carlo of the local maximum-likelihood estimator.
    McSaturation,
}

impl Model {
    pub const ALL: [Model; 7] = [
        Model::FqI,
        Model::FqIi,
        Model::FqRho,
        Model::QfimExternalRef,
        Model::QfimFiniteBeta,
        Model::CfiPhotonCounting,
        Model::McSaturation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::FqI => "FQ_I",
            Model::FqIi => "FQ_II",
            Model::FqRho => "FQ_RHO",
            Model::QfimExternalRef => "QFIM_EXTERNAL_REF",
            Model::QfimFiniteBeta => "QFIM_FINITE_BETA",
            Model::CfiPhotonCounting => "CFI_PHOTON_COUNTING",
            Model::McSaturation => "MC_SATURATION",
        }
    }

    pub fn from_name(name: &str) -> Option<Model> {
        Model::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Models reported as `1 / (F^-1)_{--}`.
    pub fn is_matrix(self) -> bool {
        matches!(self, Model::QfimExternalRef | Model::QfimFiniteBeta)
    }

    /// Models whose metric comes from the counting measurement.
    pub fn is_counting(self) -> bool {
        matches!(self, Model::CfiPhotonCounting | Model::McSaturation)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> From<OneOrMany<T>> for Vec<T> {
    fn from(v: OneOrMany<T>) -> Self {
        match v {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    OneOrMany::<T>::deserialize(d).map(Vec::from)
}

fn default_eta() -> f64 {
    1.0
}
fn default_phi() -> f64 {
    0.3
}
fn default_repetitions() -> usize {
    100_000
}
fn default_trials() -> usize {
    200
}
fn default_guard() -> usize {
    CutoffPolicy::default().guard
}
fn default_deficit() -> f64 {
    CutoffPolicy::default().deficit_tolerance
}
fn default_counting() -> GeneratorConvention {
    GeneratorConvention::UpperOnly
}

/// Scenario description. Photon numbers are dimensionless, phases in radians,
/// `eta` and `tau` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// One model name or a list.
    #[serde(deserialize_with = "one_or_many")]
    pub model: Vec<Model>,
    /// Mean photon numbers `|alpha|^2 + sinh^2 r` to sweep.
    #[serde(deserialize_with = "one_or_many")]
    pub nbar: Vec<f64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Reference amplitude `|beta|` for `QFIM_FINITE_BETA`.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Ascending `|beta|` values for the reference-beam study.
    #[serde(default)]
    pub beta_grid: Option<Vec<f64>>,
    /// Fixes the first beam-splitter transmission.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Fixes `|alpha|^2 / nbar` (the squeezing fraction is one minus this).
    #[serde(default)]
    pub alpha_fraction: Option<f64>,
    /// Fixes the squeezing magnitude `|r|`; `|alpha|^2 = nbar - sinh^2 r`.
    #[serde(default)]
    pub r: Option<f64>,
    /// Argument of `alpha`; setting either phase disables the optimal-phase choice.
    #[serde(default)]
    pub alpha_phase: Option<f64>,
    /// Argument of `r`.
    #[serde(default)]
    pub r_phase: Option<f64>,
    /// Put the squeezed vacuum in mode `b` and the coherent beam in `a`.
    #[serde(default)]
    pub swap_modes: bool,
    /// Apply the arm loss to the reference beam too.
    #[serde(default)]
    pub reference_lossy: bool,
    /// Phase generator for the counting models: `upper_only` or `symmetric`.
    #[serde(default = "default_counting")]
    pub counting_convention: GeneratorConvention,
    /// True phase for the counting models.
    #[serde(default = "default_phi")]
    pub phi: f64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_guard")]
    pub cutoff_guard: usize,
    #[serde(default = "default_deficit")]
    pub deficit_tolerance: f64,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ScenarioConfig {
    /// Minimal config for one model and one photon number, everything else default.
    pub fn new(model: Model, nbar: f64) -> Self {
        Self {
            model: vec![model],
            nbar: vec![nbar],
            eta: default_eta(),
            beta: None,
            beta_grid: None,
            tau: None,
            alpha_fraction: None,
            r: None,
            alpha_phase: None,
            r_phase: None,
            swap_modes: false,
            reference_lossy: false,
            counting_convention: default_counting(),
            phi: default_phi(),
            repetitions: default_repetitions(),
            trials: default_trials(),
            seed: 0,
            cutoff_guard: default_guard(),
            deficit_tolerance: default_deficit(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(config_error(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        if self.model.is_empty() {
            return Err(config_error("model list is empty"));
        }
        if self.nbar.is_empty() {
            return Err(config_error("nbar grid is empty"));
        }
        if let Some(bad) = self.nbar.iter().find(|n| !(n.is_finite() && **n > 0.0)) {
            return Err(config_error(format!("nbar = {bad} must be positive and finite")));
        }
        unit("eta", self.eta)?;
        if let Some(t) = self.tau {
            unit("tau", t)?;
        }
        if let Some(a) = self.alpha_fraction {
            unit("alpha_fraction", a)?;
        }
        if self.alpha_fraction.is_some() && self.r.is_some() {
            return Err(config_error("set at most one of alpha_fraction and r"));
        }
        if let Some(r) = self.r {
            if !(r.is_finite() && r >= 0.0) {
                return Err(config_error(format!("r = {r} must be finite and >= 0")));
            }
            let s2 = r.sinh().powi(2);
            if let Some(n) = self.nbar.iter().find(|n| s2 > **n * (1.0 + 1e-12)) {
                return Err(config_error(format!("sinh^2 r = {s2} exceeds nbar = {n}")));
            }
        }
        for (name, v) in [("alpha_phase", self.alpha_phase), ("r_phase", self.r_phase)] {
            if let Some(x) = v {
                if !x.is_finite() {
                    return Err(config_error(format!("{name} must be finite")));
                }
            }
        }
        if let Some(b) = self.beta {
            if !(b.is_finite() && b >= 0.0) {
                return Err(config_error(format!("beta = {b} must be finite and >= 0")));
            }
        }
        if self.model.contains(&Model::QfimFiniteBeta) && self.beta.is_none() {
            return Err(config_error("QFIM_FINITE_BETA needs beta"));
        }
        if let Some(grid) = &self.beta_grid {
            if grid.is_empty() {
                return Err(config_error("beta_grid is empty"));
            }
            if grid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                return Err(config_error("beta_grid entries must be finite and >= 0"));
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(config_error("beta_grid must be strictly ascending"));
            }
        }
        if self.counting_convention == GeneratorConvention::TwoParam {
            return Err(config_error("counting_convention must be upper_only or symmetric"));
        }
        if !self.phi.is_finite() {
            return Err(config_error("phi must be finite"));
        }
        if self.repetitions == 0 {
            return Err(config_error("repetitions must be >= 1"));
        }
        if self.trials < 2 {
            return Err(config_error("trials must be >= 2"));
        }
        if !(self.deficit_tolerance > 0.0 && self.deficit_tolerance < 1.0) {
            return Err(config_error("deficit_tolerance must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn policy(&self) -> CutoffPolicy {
        CutoffPolicy {
            deficit_tolerance: self.deficit_tolerance,
            guard: self.cutoff_guard,
        }
    }

    /// Whether the relative input phase is chosen optimally.
    pub fn optimal_phases(&self) -> bool {
        self.alpha_phase.is_none() && self.r_phase.is_none()
    }

    /// Input parameters at photon number `nbar` and squeezing fraction `f = sinh^2 r / nbar`.
    pub fn input_params(&self, nbar: f64, fraction: f64, beta: Option<f64>) -> InputParams {
        let alpha_mag = ((1.0 - fraction) * nbar).max(0.0).sqrt();
        let r_mag = (fraction * nbar).max(0.0).sqrt().asinh();
        let mut p = if self.optimal_phases() {
            InputParams::new(alpha_mag, r_mag)
        } else {
            InputParams::as_given(
                Complex64::from_polar(alpha_mag, self.alpha_phase.unwrap_or(0.0)),
                Complex64::from_polar(r_mag, self.r_phase.unwrap_or(0.0)),
            )
        };
        p.swap_modes = self.swap_modes;
        if let Some(b) = beta {
            p = p.with_beta(Complex64::new(b, 0.0));
        }
        p
    }

    /// The squeezing fraction fixed by an override, if any.
    pub fn fixed_fraction(&self, nbar: f64) -> Option<f64> {
        if let Some(a) = self.alpha_fraction {
            return Some(1.0 - a);
        }
        self.r.map(|r| (r.sinh().powi(2) / nbar).min(1.0))
    }

    /// Canonical JSON of the resolved config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`Self::canonical_json`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
