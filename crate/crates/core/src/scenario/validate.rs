//! Quick cross-check of the numerical pipeline against analytic oracles.

use serde::Serialize;

use crate::closed_form::{fq_i, fq_ii, fq_rho_balanced, qfim_analytic, ClosedFormInputs};
use crate::error::Result;
use crate::estimation::CountingModel;
use crate::fisher::{inverse_diagonal, to_plus_minus};
use crate::fock::CutoffPolicy;
use crate::interferometer::{basis_fisher, fisher_at, prepare, scalar_metric, Setup};
use crate::optics::GeneratorConvention as G;
use crate::states::InputParams;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let relative_error = if expected == 0.0 { value.abs() } else { (value / expected - 1.0).abs() };
        Self {
            name: name.into(),
            value,
            expected,
            relative_error,
            tolerance,
            passed: relative_error <= tolerance,
        }
    }

    /// Passes when `value < bound`; the error is the relative excess over the bound.
    fn strictly_below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected: bound,
            relative_error: (value / bound - 1.0).max(0.0),
            tolerance: 0.0,
            passed: value < bound,
        }
    }
}

fn setup(alpha: f64, r: f64, eta: f64, policy: CutoffPolicy) -> Setup {
    let mut s = Setup::new(InputParams::new(alpha, r)).with_eta(eta);
    s.policy = policy;
    s
}

/// Runs the oracle suite with the given cutoff policy. A guard band of at
/// least 15 is used for the pure-state comparisons, whose second moments
/// converge more slowly than the norm.
pub fn validate(policy: CutoffPolicy) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let wide = CutoffPolicy {
        guard: policy.guard.max(15),
        ..policy
    };

    let (a, r, tau) = (1.0, 0.5, 0.3);
    let x = ClosedFormInputs::new(a, r, tau)?;
    let pure = basis_fisher(&prepare(&setup(a, r, 1.0, wide))?, false)?.matrix;
    checks.push(Check::new("fq_i closed form", scalar_metric(&pure, tau, G::UpperOnly)?, fq_i(&x), 1e-8));
    checks.push(Check::new("fq_ii closed form", scalar_metric(&pure, tau, G::Symmetric)?, fq_ii(&x), 1e-8));
    let pm = to_plus_minus(&fisher_at(&pure, tau, G::TwoParam)?)?;
    let analytic = qfim_analytic(&x);
    for (i, j, label) in [(0, 0, "++"), (0, 1, "+-"), (1, 1, "--")] {
        checks.push(Check::new(format!("qfim {label} closed form"), pm.get(i, j), analytic.get(i, j), 1e-8));
    }

    let coherent = basis_fisher(&prepare(&setup(1.3, 0.0, 1.0, policy))?, false)?.matrix;
    for (tau, fi, fii) in [(0.5, 2.0, 1.0), (1.0, 4.0, 1.0)] {
        let a2 = 1.3f64 * 1.3;
        checks.push(Check::new(format!("fq_i anchor tau={tau}"), scalar_metric(&coherent, tau, G::UpperOnly)?, fi * a2, 1e-10));
        checks.push(Check::new(format!("fq_ii anchor tau={tau}"), scalar_metric(&coherent, tau, G::Symmetric)?, fii * a2, 1e-10));
    }

    let (a, r) = (1.0, 0.4);
    let input = prepare(&setup(a, r, 1.0, policy))?;
    let rho = basis_fisher(&input, true)?.matrix;
    let balanced = fq_rho_balanced(&ClosedFormInputs::new(a, r, 0.5)?);
    let rho_i = scalar_metric(&rho, 0.5, G::UpperOnly)?;
    checks.push(Check::new("averaged qfi at tau=1/2", rho_i, balanced, 1e-6));
    checks.push(Check::new("averaged qfi convention invariance", scalar_metric(&rho, 0.5, G::Symmetric)?, rho_i, 1e-8));
    let pure = basis_fisher(&input, false)?.matrix;
    let pm = to_plus_minus(&fisher_at(&pure, 0.5, G::TwoParam)?)?;
    let (inv, _, _) = inverse_diagonal(&pm, 1)?;
    checks.push(Check::new("external reference equals averaged state", 1.0 / inv, rho_i, 1e-6));
    let counting = CountingModel::from_input(&input, 0.5, G::UpperOnly)?;
    let (_, best) = counting.best_operating_point()?;
    checks.push(Check::new("photon counting at best phase", best, rho_i, 1e-6));

    let mut with_vacuum_ref = setup(a, r, 1.0, policy);
    with_vacuum_ref.params = with_vacuum_ref.params.with_beta(num_complex::Complex64::new(0.0, 0.0));
    let three = basis_fisher(&prepare(&with_vacuum_ref)?, true)?.matrix;
    checks.push(Check::new("vacuum reference reduces to averaged state", scalar_metric(&three, 0.5, G::TwoParam)?, rho_i, 1e-6));

    let lossy = basis_fisher(&prepare(&setup(a, r, 0.8, policy))?, true)?.matrix;
    let lossy_rho = scalar_metric(&lossy, 0.5, G::UpperOnly)?;
    checks.push(Check::strictly_below("loss lowers averaged qfi", lossy_rho, rho_i));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_at_default_policy() {
        for c in validate(CutoffPolicy::default()).unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }
}
