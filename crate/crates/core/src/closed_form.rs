//! Analytic Fisher information for `|r> (x) |alpha>` inputs with the optimal
//! relative input phase (see [`crate::states::PhaseConvention::Optimal`]).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormInputs {
    pub alpha_mag: f64,
    pub r_mag: f64,
    pub tau: f64,
}

impl ClosedFormInputs {
    pub fn new(alpha_mag: f64, r_mag: f64, tau: f64) -> Result<Self> {
        let bad = |name, value, reason| Err(Error::InvalidParameter { name, value, reason });
        if !(alpha_mag >= 0.0 && alpha_mag.is_finite()) {
            return bad("alpha_mag", alpha_mag, "must be finite and >= 0");
        }
        if !(r_mag >= 0.0 && r_mag.is_finite()) {
            return bad("r_mag", r_mag, "must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&tau) {
            return bad("tau", tau, "must lie in [0, 1]");
        }
        Ok(Self { alpha_mag, r_mag, tau })
    }

    fn a2(&self) -> f64 {
        self.alpha_mag * self.alpha_mag
    }
}

/// `4 tau (1 - tau) (|alpha|^2 e^{2r} + sinh^2 r)`.
pub fn frak_f(x: &ClosedFormInputs) -> f64 {
    4.0 * x.tau * (1.0 - x.tau) * (x.a2() * (2.0 * x.r_mag).exp() + x.r_mag.sinh().powi(2))
}

/// `4 tau^2 |alpha|^2 + 2 (1 - tau)^2 sinh^2(2r) + frak_f`.
pub fn fq_i(x: &ClosedFormInputs) -> f64 {
    4.0 * x.tau * x.tau * x.a2() + 2.0 * (1.0 - x.tau).powi(2) * (2.0 * x.r_mag).sinh().powi(2) + frak_f(x)
}

/// `(1 - 2 tau)^2 [|alpha|^2 + sinh^2(2r) / 2] + frak_f`.
pub fn fq_ii(x: &ClosedFormInputs) -> f64 {
    (1.0 - 2.0 * x.tau).powi(2) * (x.a2() + 0.5 * (2.0 * x.r_mag).sinh().powi(2)) + frak_f(x)
}

/// `|alpha|^2 e^{2r} + sinh^2 r`, the phase-averaged QFI at `tau = 1/2`.
/// The `tau` field is ignored.
pub fn fq_rho_balanced(x: &ClosedFormInputs) -> f64 {
    x.a2() * (2.0 * x.r_mag).exp() + x.r_mag.sinh().powi(2)
}

/// `G = |alpha|^2 + sinh^2(2r)/2`.
pub fn frak_g(x: &ClosedFormInputs) -> f64 {
    x.a2() + 0.5 * (2.0 * x.r_mag).sinh().powi(2)
}

/// `H = sinh^2(2r)/2 - |alpha|^2`.
pub fn frak_h(x: &ClosedFormInputs) -> f64 {
    0.5 * (2.0 * x.r_mag).sinh().powi(2) - x.a2()
}

/// Two-phase QFI matrix in `(phi+, phi-)`:
/// `[[G, (1-2tau) H], [(1-2tau) H, (1-2tau)^2 G + frak_f]]`.
pub fn qfim_analytic(x: &ClosedFormInputs) -> FisherMatrix {
    let u = 1.0 - 2.0 * x.tau;
    let g = frak_g(x);
    let h = frak_h(x);
    let m = DMatrix::from_row_slice(2, 2, &[g, u * h, u * h, u * u * g + frak_f(x)]);
    FisherMatrix::new(vec!["phi+".into(), "phi-".into()], m).expect("symmetric by construction")
}
