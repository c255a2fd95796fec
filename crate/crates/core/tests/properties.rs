//! Randomized invariants.

mod common;

use common::{diagonal_operator, max_norm, random_density};
use nalgebra::DMatrix;
use phaseref::closed_form::{fq_i, fq_ii, fq_rho_balanced, frak_f, qfim_analytic, ClosedFormInputs};
use phaseref::fisher::{derivative_density, inverse_diagonal, qfi_mixed, FisherMatrix};
use phaseref::fock::FockSpace;
use phaseref::optics::{beam_splitter, loss_channel, phase_shift, LossModel};
use phaseref::states::{dephase_density, MODE_A, MODE_B};
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cases(30))]

    #[test]
    fn counting_never_beats_quantum_bound(
        alpha in 0.0..1.5f64, r in 0.0..0.8f64, tau in 0.0..=1.0f64, eta in 0.5..=1.0f64, phi in 0.0..3.1f64,
    ) {
        common::cfi_below_qfi(alpha, r, tau, eta, phi).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn loss_semigroup(eta1 in 0.0..=1.0f64, eta2 in 0.0..=1.0f64, seed in any::<u64>()) {
        common::loss_semigroup(eta1, eta2, seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn beam_splitter_is_unitary(tau in 0.0..=1.0f64, cutoff in 1usize..7) {
        common::beam_splitter_unitary(tau, cutoff).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn channels_keep_trace_and_hermiticity(eta in 0.0..=1.0f64, tau in 0.0..=1.0f64, seed in any::<u64>()) {
        common::channels_preserve_trace(eta, tau, seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn dephasing_is_idempotent_and_commutes_with_beam_splitter(tau in 0.0..=1.0f64, seed in any::<u64>()) {
        let space = FockSpace::uniform(2, 4).unwrap();
        let rho = random_density(&space, 2, seed);
        let modes = [MODE_A, MODE_B];
        let once = dephase_density(&rho, &modes).unwrap();
        let twice = dephase_density(&once, &modes).unwrap();
        prop_assert!(once.max_abs_diff(&twice) <= 1e-12);
        let b = beam_splitter(tau, &space, (MODE_A, MODE_B)).unwrap();
        let left = dephase_density(&b.conjugate(&rho).unwrap(), &modes).unwrap();
        let right = b.conjugate(&once).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-12);
    }

    #[test]
    fn equal_loss_commutes_with_phase(eta in 0.0..=1.0f64, phi in -3.0..3.0f64, seed in any::<u64>()) {
        let space = FockSpace::uniform(2, 4).unwrap();
        let rho = random_density(&space, 3, seed);
        let u = phase_shift(&space, MODE_A, phi).unwrap();
        let loss = LossModel::arms(eta).unwrap();
        let a = loss_channel(&u.conjugate(&rho).unwrap(), &loss).unwrap();
        let b = u.conjugate(&loss_channel(&rho, &loss).unwrap()).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-12);
    }

    #[test]
    fn averaged_qfi_is_gauge_invariant(shift in -2.0..2.0f64, seed in any::<u64>()) {
        let space = FockSpace::uniform(2, 3).unwrap();
        let rho = dephase_density(&random_density(&space, 3, seed), &[MODE_A, MODE_B]).unwrap();
        let plain = diagonal_operator(&space, |n| n[0] as f64);
        let shifted = diagonal_operator(&space, |n| n[0] as f64 + shift * (n[0] + n[1]) as f64);
        let f0 = qfi_mixed(&rho, &derivative_density(&rho, &plain).unwrap()).unwrap().value();
        let f1 = qfi_mixed(&rho, &derivative_density(&rho, &shifted).unwrap()).unwrap().value();
        prop_assert!((f0 - f1).abs() <= 1e-9 * f0.max(1.0));
    }

    #[test]
    fn nuisance_parameter_costs_information(a in 0.01..5.0f64, b in 0.01..5.0f64, t in -1.0..1.0f64) {
        let off = t * (a * b).sqrt();
        let f = FisherMatrix::new(vec!["x".into(), "y".into()], DMatrix::from_row_slice(2, 2, &[a, off, off, b])).unwrap();
        match inverse_diagonal(&f, 0) {
            Ok((inv, _, _)) => prop_assert!(inv >= (1.0 / a) * (1.0 - 1e-12)),
            Err(_) => prop_assert!(t.abs() > 0.999_999),
        }
        let diag = FisherMatrix::new(vec!["x".into(), "y".into()], DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])).unwrap();
        prop_assert!((inverse_diagonal(&diag, 0).unwrap().0 * a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_are_nonnegative_and_symmetric(alpha in 0.0..3.0f64, r in 0.0..1.5f64, tau in 0.0..=1.0f64) {
        let x = ClosedFormInputs::new(alpha, r, tau).unwrap();
        prop_assert!(fq_i(&x) >= 0.0 && fq_ii(&x) >= 0.0 && frak_f(&x) >= 0.0);
        let mirrored = ClosedFormInputs::new(alpha, r, 1.0 - tau).unwrap();
        let minus = |m: &FisherMatrix| inverse_diagonal(m, 1).map(|v| v.0).unwrap_or(f64::INFINITY);
        let (p, q) = (minus(&qfim_analytic(&x)), minus(&qfim_analytic(&mirrored)));
        if p.is_finite() && q.is_finite() {
            prop_assert!((p - q).abs() <= 1e-9 * p.abs().max(1e-12));
        }
        let half = ClosedFormInputs::new(alpha, r, 0.5).unwrap();
        prop_assert!(fq_rho_balanced(&half) >= 0.0);
        prop_assert!((fq_rho_balanced(&half) - frak_f(&half)).abs() <= 1e-12 * frak_f(&half).max(1.0));
    }

    #[test]
    fn hermitian_derivative_of_dephased_state_is_traceless(seed in any::<u64>()) {
        let space = FockSpace::uniform(2, 3).unwrap();
        let rho = dephase_density(&random_density(&space, 2, seed), &[MODE_A, MODE_B]).unwrap();
        let d = derivative_density(&rho, &diagonal_operator(&space, |n| n[0] as f64)).unwrap();
        prop_assert!(d.trace().abs() < 1e-14);
        prop_assert!(max_norm((d.matrix() - d.matrix().adjoint()).iter()) < 1e-14);
    }
}

proptest! {
    #![proptest_config(cases(6))]

    #[test]
    fn qfi_drops_along_the_loss_grid(alpha in 0.3..1.5f64, r in 0.0..0.8f64, tau in 0.1..0.9f64) {
        common::loss_monotone(alpha, r, tau).map_err(TestCaseError::fail)?;
    }
}
