//! Input states: coherent, squeezed vacuum, their product at the
//! interferometer input, and common-phase averaging.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{CutoffPolicy, DensityOperator, FockSpace, FockVector, ZERO};

/// Upper interferometer mode (`a`).
pub const MODE_A: usize = 0;
/// Lower interferometer mode (`b`).
pub const MODE_B: usize = 1;
/// Reference beam mode (`c`), present only in three-mode scenarios.
pub const MODE_REF: usize = 2;

/// How the phases of `alpha` and `r` are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// `r = |r|`, `alpha = |alpha|`. With the beam splitter
    /// `exp[-i theta (a^dag b + a b^dag)]` and `|r> = exp[(r* a^2 - r a^dag^2)/2]|0>`
    /// real amplitudes maximize the phase sensitivity; `alpha = +-i |alpha|`
    /// gives `e^{-2r}` in place of `e^{2r}`.
    #[default]
    Optimal,
    /// Use the complex values exactly as given.
    AsGiven,
}

/// Parameters of the interferometer input `|r> (x) |alpha>` (optionally `(x) |beta>`).
///
/// By default the squeezed vacuum enters the upper mode `a` and the coherent
/// beam the lower mode `b`; `swap_modes` exchanges them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputParams {
    pub alpha: Complex64,
    pub r: Complex64,
    pub beta: Option<Complex64>,
    pub phase: PhaseConvention,
    pub swap_modes: bool,
}

impl InputParams {
    /// Magnitudes only, with the optimal relative phase.
    pub fn new(alpha_mag: f64, r_mag: f64) -> Self {
        Self {
            alpha: Complex64::new(alpha_mag, 0.0),
            r: Complex64::new(r_mag, 0.0),
            beta: None,
            phase: PhaseConvention::Optimal,
            swap_modes: false,
        }
    }

    pub fn with_beta(mut self, beta: Complex64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn as_given(alpha: Complex64, r: Complex64) -> Self {
        Self {
            alpha,
            r,
            beta: None,
            phase: PhaseConvention::AsGiven,
            swap_modes: false,
        }
    }

    /// Coherent amplitude actually injected.
    pub fn effective_alpha(&self) -> Complex64 {
        match self.phase {
            PhaseConvention::Optimal => Complex64::new(self.alpha.norm(), 0.0),
            PhaseConvention::AsGiven => self.alpha,
        }
    }

    /// Squeezing parameter actually applied.
    pub fn effective_r(&self) -> Complex64 {
        match self.phase {
            PhaseConvention::Optimal => Complex64::new(self.r.norm(), 0.0),
            PhaseConvention::AsGiven => self.r,
        }
    }

    /// `|alpha|^2 + sinh^2 |r|`, the interferometer photon budget (excludes the reference).
    pub fn mean_photons(&self) -> f64 {
        self.alpha.norm_sqr() + self.r.norm().sinh().powi(2)
    }

    pub fn mode_count(&self) -> usize {
        if self.beta.is_some() {
            3
        } else {
            2
        }
    }

    pub fn squeezed_mode(&self) -> usize {
        if self.swap_modes {
            MODE_B
        } else {
            MODE_A
        }
    }

    pub fn coherent_mode(&self) -> usize {
        if self.swap_modes {
            MODE_A
        } else {
            MODE_B
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |z: Complex64| z.re.is_finite() && z.im.is_finite();
        if !finite(self.alpha) {
            return Err(invalid("alpha", self.alpha.norm()));
        }
        if !finite(self.r) {
            return Err(invalid("r", self.r.norm()));
        }
        if let Some(b) = self.beta {
            if !finite(b) {
                return Err(invalid("beta", b.norm()));
            }
        }
        Ok(())
    }
}

fn invalid(name: &'static str, value: f64) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason: "must be finite",
    }
}

/// Poisson photon statistics of `|alpha>` with `|alpha|^2 = mean`.
pub fn poisson_pmf(mean: f64) -> impl FnMut(usize) -> f64 {
    let mut last = (-mean).exp();
    let mut next_n = 0usize;
    move |n| {
        assert_eq!(n, next_n, "pmf must be evaluated sequentially");
        if n > 0 {
            last *= mean / n as f64;
        }
        next_n += 1;
        last
    }
}

/// Photon statistics of the squeezed vacuum with `|r| = r_mag` (even n only).
pub fn squeezed_pmf(r_mag: f64) -> impl FnMut(usize) -> f64 {
    let t2 = r_mag.tanh().powi(2);
    let mut even = 1.0 / r_mag.cosh();
    let mut next_n = 0usize;
    move |n| {
        assert_eq!(n, next_n, "pmf must be evaluated sequentially");
        next_n += 1;
        if n % 2 == 1 {
            return 0.0;
        }
        if n > 0 {
            let m = (n / 2 - 1) as f64;
            even *= (2.0 * m + 1.0) / (2.0 * m + 2.0) * t2;
        }
        even
    }
}

const MAX_AUTO_CUTOFF: usize = 4000;

pub fn auto_cutoff_coherent(alpha: Complex64, policy: &CutoffPolicy) -> Result<usize> {
    policy.cutoff_for(poisson_pmf(alpha.norm_sqr()), MAX_AUTO_CUTOFF)
}

pub fn auto_cutoff_squeezed(r: Complex64, policy: &CutoffPolicy) -> Result<usize> {
    policy.cutoff_for(squeezed_pmf(r.norm()), MAX_AUTO_CUTOFF)
}

/// Common cutoff for both interferometer modes, sized on the distribution of
/// the *total* photon number of `|r> (x) |alpha>`. Every total-number sector
/// below the cutoff is then complete in the truncated two-mode space, which
/// keeps beam splitters exact where the state has weight.
pub fn auto_cutoff_pair(alpha: Complex64, r: Complex64, policy: &CutoffPolicy) -> Result<usize> {
    let mut sq = squeezed_pmf(r.norm());
    let mut po = poisson_pmf(alpha.norm_sqr());
    let mut p_sq = Vec::new();
    let mut p_po = Vec::new();
    policy.cutoff_for(
        |n| {
            p_sq.push(sq(n));
            p_po.push(po(n));
            (0..=n).map(|k| p_sq[k] * p_po[n - k]).sum()
        },
        MAX_AUTO_CUTOFF,
    )
}

/// Reference-mode cutoff: at least `|beta|^2 + 6 sqrt(|beta|^2 + 1)` and at
/// least what the deficit rule requires, plus the guard band.
pub fn auto_cutoff_reference(beta: Complex64, policy: &CutoffPolicy) -> Result<usize> {
    let b2 = beta.norm_sqr();
    let sized = (b2 + 6.0 * (b2 + 1.0).sqrt()).ceil() as usize;
    let by_deficit = auto_cutoff_coherent(beta, policy)? - policy.guard;
    Ok(sized.max(by_deficit) + policy.guard)
}

/// Coherent-state amplitudes `exp(-|alpha|^2/2) alpha^n / sqrt(n!)` for `n <= cutoff`.
pub fn coherent_amplitudes(alpha: Complex64, cutoff: usize) -> Vec<Complex64> {
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps.push(c);
    for n in 1..=cutoff {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    amps
}

/// Squeezed-vacuum amplitudes for `|r> = exp[(r* a^2 - r a^dag^2)/2] |0>`:
/// `c_2m = (-e^{i arg r} tanh|r|)^m sqrt((2m)!) / (2^m m! sqrt(cosh|r|))`, odd terms zero.
pub fn squeezed_amplitudes(r: Complex64, cutoff: usize) -> Vec<Complex64> {
    let mag = r.norm();
    let ratio = -Complex64::from_polar(mag.tanh(), r.arg());
    let mut amps = vec![ZERO; cutoff + 1];
    let mut c = Complex64::new(1.0 / mag.cosh().sqrt(), 0.0);
    let mut m = 0usize;
    while 2 * m <= cutoff {
        amps[2 * m] = c;
        let mf = m as f64;
        c = c * ratio * ((2.0 * mf + 1.0) / (2.0 * mf + 2.0)).sqrt();
        m += 1;
    }
    amps
}

fn single_mode(space: &FockSpace) -> Result<usize> {
    if space.mode_count() != 1 {
        return Err(Error::SizeMismatch {
            expected: 1,
            actual: space.mode_count(),
        });
    }
    Ok(space.cutoff(0))
}

fn check_deficit(v: &FockVector, tolerance: f64) -> Result<()> {
    let deficit = v.truncation_deficit();
    if deficit > tolerance {
        return Err(Error::CutoffTooSmall {
            cutoff: v.space().cutoffs().iter().copied().max().unwrap_or(0),
            deficit,
            tolerance,
        });
    }
    Ok(())
}

/// Coherent state on a single-mode space; errors if the cutoff leaves a
/// truncation deficit above the default tolerance.
pub fn coherent_state(alpha: Complex64, space: &FockSpace) -> Result<FockVector> {
    let cutoff = single_mode(space)?;
    let v = FockVector::from_vec(space.clone(), coherent_amplitudes(alpha, cutoff))?;
    check_deficit(&v, CutoffPolicy::default().deficit_tolerance)?;
    Ok(v)
}

/// Squeezed vacuum on a single-mode space, from the closed-form amplitudes.
pub fn squeezed_vacuum(r: Complex64, space: &FockSpace) -> Result<FockVector> {
    let cutoff = single_mode(space)?;
    let v = FockVector::from_vec(space.clone(), squeezed_amplitudes(r, cutoff))?;
    check_deficit(&v, CutoffPolicy::default().deficit_tolerance)?;
    Ok(v)
}

/// Product input state on a two-mode (or, with `beta`, three-mode) space.
pub fn interferometer_input(params: &InputParams, space: &FockSpace) -> Result<FockVector> {
    let psi = interferometer_input_truncated(params, space)?;
    let tolerance = CutoffPolicy::default().deficit_tolerance;
    let deficit = psi.truncation_deficit();
    if deficit > tolerance {
        return Err(Error::CutoffTooSmall {
            cutoff: space.cutoffs().iter().copied().min().unwrap_or(0),
            deficit,
            tolerance,
        });
    }
    Ok(psi)
}

/// Same product state without the per-mode deficit check, for explicitly
/// undersized test spaces and callers that size cutoffs themselves.
pub fn interferometer_input_truncated(params: &InputParams, space: &FockSpace) -> Result<FockVector> {
    params.validate()?;
    if space.mode_count() != params.mode_count() {
        return Err(Error::SizeMismatch {
            expected: params.mode_count(),
            actual: space.mode_count(),
        });
    }
    let mut factors: Vec<Vec<Complex64>> = vec![Vec::new(); space.mode_count()];
    factors[params.squeezed_mode()] =
        squeezed_amplitudes(params.effective_r(), space.cutoff(params.squeezed_mode()));
    factors[params.coherent_mode()] =
        coherent_amplitudes(params.effective_alpha(), space.cutoff(params.coherent_mode()));
    if let Some(beta) = params.beta {
        factors[MODE_REF] = coherent_amplitudes(beta, space.cutoff(MODE_REF));
    }
    FockVector::new(space.clone(), product_amplitudes(&factors))
}

/// Kronecker product of per-mode amplitude lists in basis order.
pub fn product_amplitudes(factors: &[Vec<Complex64>]) -> DVector<Complex64> {
    let mut out = vec![Complex64::new(1.0, 0.0)];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for a in &out {
            next.extend(f.iter().map(|b| a * b));
        }
        out = next;
    }
    DVector::from_vec(out)
}

/// Averages `|psi><psi|` over a common phase rotation of `modes`: keeps only
/// the blocks of equal total photon number over those modes.
pub fn dephase_common(state: &FockVector, modes: &[usize]) -> Result<DensityOperator> {
    dephase_density(&state.projector(), modes)
}

/// Same block projection applied to a density operator.
pub fn dephase_density(rho: &DensityOperator, modes: &[usize]) -> Result<DensityOperator> {
    if modes.is_empty() {
        return Err(Error::EmptyModeSet);
    }
    let space = rho.space();
    for &m in modes {
        space.check_mode(m)?;
    }
    let total = space.total_number_table(modes);
    let m = rho.matrix();
    let d = space.dimension();
    let out = DMatrix::from_fn(d, d, |i, j| if total[i] == total[j] { m[(i, j)] } else { ZERO });
    DensityOperator::new(space.clone(), out)
}
