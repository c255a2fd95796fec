//! Independent oracles for the worked examples of each module.

mod common;

use common::{c, explicit_qfim, explicit_state, generators, max_norm, rel};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use phaseref::closed_form::{fq_i, fq_ii, fq_rho_balanced, frak_f, qfim_analytic, ClosedFormInputs};
use phaseref::estimation::{mle_estimate, run_trials, sample, CountingModel};
use phaseref::fisher::{
    crb_bound, derivative_density, derivative_state, inverse_diagonal, qfi_mixed, qfi_pure, qfim_mixed,
    to_plus_minus, FisherMatrix,
};
use phaseref::fock::{annihilation_op, number_op, partial_trace, tensor, CutoffPolicy, DensityOperator, FockSpace, FockVector};
use phaseref::interferometer::{
    basis_fisher, prepare, prepare_with_cutoffs, scalar_metric, Cutoffs, PreparedInput, Setup,
};
use phaseref::optics::{beam_splitter, phase_shift, GeneratorConvention as G};
use phaseref::spectral::Ensemble;
use phaseref::states::{
    auto_cutoff_coherent, coherent_state, dephase_common, interferometer_input, squeezed_amplitudes, InputParams,
    MODE_A, MODE_B,
};

#[test]
fn coherent_amplitudes_match_log_space_series() {
    let alpha = c(2.0, 0.0);
    let space = FockSpace::single(30);
    // the deficit at cutoff 30 is ~1e-11, below the constructor's threshold
    let v = coherent_state(alpha, &space).unwrap();
    let mut log_fact = 0.0;
    for n in 0..=30usize {
        if n > 0 {
            log_fact += (n as f64).ln();
        }
        let expected = (-2.0 + n as f64 * 2f64.ln() - 0.5 * log_fact).exp();
        let got = v.amplitude(&[n]);
        assert!((got.re - expected).abs() <= 1e-14 * expected.max(1e-300) + 1e-16, "n={n}: {got} vs {expected}");
        assert_eq!(got.im, 0.0);
    }
}

#[test]
fn coherent_mean_and_eigenrelation() {
    let alpha = c(1.0, 0.5);
    let cut = auto_cutoff_coherent(alpha, &CutoffPolicy::default()).unwrap();
    let space = FockSpace::single(cut);
    let v = coherent_state(alpha, &space).unwrap();
    let n = v.expectation(&number_op(&space, 0).unwrap()).unwrap();
    assert!((n.re - alpha.norm_sqr()).abs() < 1e-10);
    let av = annihilation_op(&space, 0).unwrap().apply(&v).unwrap();
    for k in 0..cut - 5 {
        assert!((av.amplitude(&[k]) - alpha * v.amplitude(&[k])).norm() < 1e-12);
    }
}

#[test]
fn squeezed_vacuum_matches_exponentiated_generator() {
    // oversized space so the boundary of the truncated exponential is far away
    let big = 160;
    let r = c(0.5, 0.0);
    let a = annihilation_op(&FockSpace::single(big), 0).unwrap().to_dense();
    let ad = a.adjoint();
    let gen = (&a * &a * r.conj() - &ad * &ad * r) * c(0.5, 0.0);
    let u = gen.exp();
    let amps = squeezed_amplitudes(r, 60);
    for n in 0..=60 {
        assert!((u[(n, 0)] - amps[n]).norm() < 1e-8, "n={n}: {} vs {}", u[(n, 0)], amps[n]);
    }
}

#[test]
fn two_coherent_beams_carry_summed_photon_number() {
    let (a, b) = (c(0.8, 0.3), c(-0.5, 1.1));
    let sa = FockSpace::single(25);
    let sb = FockSpace::single(25);
    let v = tensor(&coherent_state(a, &sa).unwrap(), &coherent_state(b, &sb).unwrap());
    let space = v.space().clone();
    let n = v.expectation(&number_op(&space, 0).unwrap()).unwrap() + v.expectation(&number_op(&space, 1).unwrap()).unwrap();
    assert!((n.re - a.norm_sqr() - b.norm_sqr()).abs() < 1e-9);
}

#[test]
fn default_input_has_real_amplitudes_and_documented_photon_budget() {
    let p = InputParams::new(0.9, 0.4);
    let space = FockSpace::uniform(2, 30).unwrap();
    let v = interferometer_input(&p, &space).unwrap();
    assert!(v.amplitudes().iter().all(|z| z.im == 0.0));
    let n = v.expectation(&number_op(&space, 0).unwrap()).unwrap().re + v.expectation(&number_op(&space, 1).unwrap()).unwrap().re;
    assert!((n - p.mean_photons()).abs() < 1e-9);
    // squeezed light sits in the upper mode
    let sq = v.expectation(&number_op(&space, MODE_A).unwrap()).unwrap().re;
    assert!((sq - 0.4f64.sinh().powi(2)).abs() < 1e-9);
}

#[test]
fn dephasing_matches_phase_quadrature() {
    let p = InputParams::new(1.0, 0.3);
    let space = FockSpace::uniform(2, 20).unwrap();
    let psi = interferometer_input(&p, &space).unwrap();
    let exact = dephase_common(&psi, &[MODE_A, MODE_B]).unwrap();
    let total = space.total_number_table(&[MODE_A, MODE_B]);
    let d = space.dimension();
    let x = psi.amplitudes();
    let mut quad = DMatrix::<Complex64>::zeros(d, d);
    let points = 256;
    for k in 0..points {
        let theta = std::f64::consts::TAU * k as f64 / points as f64;
        let y = DVector::from_iterator(d, (0..d).map(|i| x[i] * Complex64::from_polar(1.0, -theta * total[i] as f64)));
        quad += &y * y.adjoint();
    }
    quad /= c(points as f64, 0.0);
    let dev = max_norm((exact.matrix() - quad).iter());
    assert!(dev < 1e-10, "{dev:e}");
}

#[test]
fn single_photon_outcomes_follow_two_level_oracle() {
    let cut = Cutoffs { pair: 2, reference: None };
    let space = cut.space();
    let mut col = DMatrix::zeros(space.dimension(), 1);
    col[(space.index(&[1, 0]), 0)] = c(1.0, 0.0);
    let input = PreparedInput {
        ensemble: Ensemble::new(space, col).unwrap(),
        cutoffs: cut,
        truncation_deficit: 0.0,
        discarded_weight: 0.0,
    };
    // 2x2 single-photon block of exp[-i theta (a^dag b + a b^dag)] in the basis (|1,0>, |0,1>)
    let bs = |tau: f64| {
        let t = tau.sqrt().asin();
        DMatrix::from_row_slice(2, 2, &[c(t.cos(), 0.0), c(0.0, -t.sin()), c(0.0, -t.sin()), c(t.cos(), 0.0)])
    };
    for tau in [0.5, 0.3] {
        let model = CountingModel::from_input(&input, tau, G::UpperOnly).unwrap();
        for phi in [0.0, 0.3, 1.1, 2.5] {
            let u = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::from_polar(1.0, -phi), c(1.0, 0.0)]));
            let out = bs(0.5) * u * bs(tau) * DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
            let dist = model.distribution(phi);
            assert!((dist.probability(1, 0) - out[0].norm_sqr()).abs() < 1e-13);
            assert!((dist.probability(0, 1) - out[1].norm_sqr()).abs() < 1e-13);
            if tau == 0.5 {
                // balanced: sin^2 / cos^2 of phi/2 with zero offset in this convention
                assert!((dist.probability(1, 0) - (phi / 2.0).sin().powi(2)).abs() < 1e-13);
                assert!((dist.probability(0, 1) - (phi / 2.0).cos().powi(2)).abs() < 1e-13);
            }
            assert!(dist.derivative_sum().abs() < 1e-12);
        }
    }
}

#[test]
fn outcome_table_is_normalized_and_vacuum_is_a_point_mass() {
    let model = CountingModel::new(&Setup::new(InputParams::new(1.0, 0.4)), 0.5, G::UpperOnly).unwrap();
    let dist = model.distribution(0.3);
    assert!((1.0 - dist.total()).abs() <= 1e-9);
    assert!(dist.derivative_sum().abs() < 1e-10);
    let vac = CountingModel::new(&Setup::new(InputParams::new(0.0, 0.0)), 0.5, G::UpperOnly).unwrap();
    assert!((vac.distribution(0.7).probability(0, 0) - 1.0).abs() < 1e-15);
}

#[test]
fn counting_on_coherent_light_reaches_averaged_qfi() {
    let setup = Setup::new(InputParams::new(1.0, 0.0));
    let model = CountingModel::new(&setup, 0.5, G::UpperOnly).unwrap();
    for phi in [0.3, 1.0, 2.0] {
        assert!(rel(model.fisher(phi).unwrap(), 1.0) < 1e-6);
    }
    assert!(rel(fq_rho_balanced(&ClosedFormInputs::new(1.0, 0.0, 0.5).unwrap()), 1.0) < 1e-15);
}

#[test]
fn analytic_derivative_matches_central_difference() {
    let p = InputParams::new(0.6, 0.3);
    let psi0 = explicit_state(&p, 0.3, &CutoffPolicy::default());
    let space = psi0.space().clone();
    let phi = 0.4;
    let h = 1e-5;
    let at = |x: f64| phase_shift(&space, MODE_A, x).unwrap().apply(&psi0).unwrap();
    let analytic = derivative_state(&at(phi), &number_op(&space, MODE_A).unwrap()).unwrap();
    let fd = (at(phi + h).amplitudes() - at(phi - h).amplitudes()) / c(2.0 * h, 0.0);
    let dev = max_norm((analytic.amplitudes() - fd).iter());
    assert!(dev < 1e-8, "{dev:e}");

    // density version on the dephased state
    let rho = dephase_common(&psi0, &[MODE_A, MODE_B]).unwrap();
    let rho_at = |x: f64| phase_shift(&space, MODE_A, x).unwrap().conjugate(&rho).unwrap();
    let d = derivative_density(&rho_at(phi), &number_op(&space, MODE_A).unwrap()).unwrap();
    let fd = (rho_at(phi + h).matrix() - rho_at(phi - h).matrix()) / c(2.0 * h, 0.0);
    assert!(max_norm((d.matrix() - fd).iter()) < 1e-7);
}

#[test]
fn derivative_examples() {
    let space = FockSpace::uniform(2, 3).unwrap();
    let psi = phaseref::states::interferometer_input_truncated(&InputParams::new(0.3, 0.1), &space).unwrap();
    let id = phaseref::fock::ModeOperator::identity(space.clone());
    let d = derivative_state(&psi, &id).unwrap();
    assert!(max_norm((d.amplitudes() - psi.amplitudes() * c(0.0, -1.0)).iter()) < 1e-15);
    let vac = FockVector::vacuum(space.clone());
    let dv = derivative_state(&vac, &number_op(&space, 0).unwrap()).unwrap();
    assert_eq!(dv.norm_sqr(), 0.0);
}

#[test]
fn pure_qfi_examples() {
    let space = FockSpace::single(40);
    let fock = FockVector::basis(space.clone(), &[3]);
    let n = number_op(&space, 0).unwrap();
    assert!(qfi_pure(&fock, &derivative_state(&fock, &n).unwrap()).unwrap().value().abs() < 1e-14);
    let coh = coherent_state(c(1.3, 0.0), &space).unwrap();
    let f = qfi_pure(&coh, &derivative_state(&coh, &n).unwrap()).unwrap().value();
    assert!(rel(f, 4.0 * 1.69) < 1e-9);
}

#[test]
fn interferometer_qfi_matches_closed_forms() {
    let policy = CutoffPolicy::with_guard(15);
    for (a, r, tau) in [(1.0, 0.5, 0.5), (1.0, 0.5, 0.3)] {
        let psi = explicit_state(&InputParams::new(a, r), tau, &policy);
        let x = ClosedFormInputs::new(a, r, tau).unwrap();
        assert!(rel(explicit_qfim(&psi, G::UpperOnly).value(), fq_i(&x)) < 1e-8);
        assert!(rel(explicit_qfim(&psi, G::Symmetric).value(), fq_ii(&x)) < 1e-8);
        let pm = to_plus_minus(&explicit_qfim(&psi, G::TwoParam)).unwrap();
        let an = qfim_analytic(&x);
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            assert!((pm.get(i, j) - an.get(i, j)).abs() <= 1e-8 * an.get(0, 0).abs().max(an.get(1, 1).abs()));
        }
    }
}

#[test]
fn qfim_examples() {
    // product state in a, b: no cross information
    let space = FockSpace::uniform(2, 30).unwrap();
    let psi = interferometer_input(&InputParams::new(1.1, 0.4), &space).unwrap().normalized();
    let f = explicit_qfim(&psi, G::TwoParam);
    assert!(f.get(0, 1).abs() < 1e-10);
    let g = generators(G::TwoParam, &space);
    for (i, gi) in g.iter().enumerate() {
        let single = qfi_pure(&psi, &derivative_state(&psi, gi).unwrap()).unwrap().value();
        assert!((f.get(i, i) - single).abs() < 1e-12);
    }
    // rank-1 density operator reproduces the pure QFIM
    let small = explicit_state(&InputParams::new(0.7, 0.3), 0.4, &CutoffPolicy::default());
    let rho = DensityOperator::from_pure(&small);
    let drho: Vec<DensityOperator> =
        generators(G::TwoParam, small.space()).iter().map(|g| derivative_density(&rho, g).unwrap()).collect();
    let mixed = qfim_mixed(&rho, &drho).unwrap();
    let pure = explicit_qfim(&small, G::TwoParam);
    assert!((mixed.matrix() - pure.matrix()).abs().max() < 1e-8 * pure.matrix().abs().max());
    assert!(mixed.is_psd());
}

#[test]
fn dense_sld_on_dephased_state_matches_balanced_formula() {
    let (a, r) = (1.0, 0.4);
    let psi = explicit_state(&InputParams::new(a, r), 0.5, &CutoffPolicy::default());
    let rho = dephase_common(&psi, &[MODE_A, MODE_B]).unwrap();
    let expected = fq_rho_balanced(&ClosedFormInputs::new(a, r, 0.5).unwrap());
    let upper = qfi_mixed(&rho, &derivative_density(&rho, &number_op(psi.space(), MODE_A).unwrap()).unwrap()).unwrap();
    let sym_gen = &generators(G::Symmetric, psi.space())[0];
    let sym = qfi_mixed(&rho, &derivative_density(&rho, sym_gen).unwrap()).unwrap();
    assert!(rel(upper.value(), expected) < 1e-6);
    assert!(rel(sym.value(), upper.value()) < 1e-8);
}

#[test]
fn vacuum_reference_reduces_to_two_mode_average() {
    let p = InputParams::new(1.0, 0.4);
    let two = basis_fisher(&prepare(&Setup::new(p)).unwrap(), true).unwrap().matrix;
    let three_setup = Setup::new(p.with_beta(c(0.0, 0.0)));
    let three = basis_fisher(&prepare(&three_setup).unwrap(), true).unwrap().matrix;
    let rho = scalar_metric(&two, 0.5, G::UpperOnly).unwrap();
    let minus = scalar_metric(&three, 0.5, G::TwoParam).unwrap();
    assert!(rel(minus, rho) < 1e-6);
}

#[test]
fn plus_minus_and_bounds() {
    let id = FisherMatrix::new(vec!["phi1".into(), "phi2".into()], DMatrix::identity(2, 2)).unwrap();
    let pm = to_plus_minus(&id).unwrap();
    assert!((pm.matrix() - DMatrix::identity(2, 2) * 0.5).abs().max() < 1e-15);
    assert!(rel(crb_bound(&FisherMatrix::scalar("phi", 4.0), "phi", 1).unwrap().value, 0.5) < 1e-15);
    let diag = FisherMatrix::new(vec!["p".into(), "m".into()], DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0]))).unwrap();
    assert!(rel(inverse_diagonal(&diag, 1).unwrap().0, 0.2) < 1e-15);
    // balanced lossless bound on the phase difference
    let x = ClosedFormInputs::new(1.2, 0.3, 0.5).unwrap();
    let expected = (1.44 * 0.6f64.exp() + 0.3f64.sinh().powi(2)).powf(-0.5);
    let b = crb_bound(&qfim_analytic(&x), "phi-", 1).unwrap();
    assert!(rel(b.value, expected) < 1e-12);
}

#[test]
fn frak_f_examples() {
    assert_eq!(frak_f(&ClosedFormInputs::new(1.3, 0.7, 0.0).unwrap()), 0.0);
    assert!(rel(frak_f(&ClosedFormInputs::new(1.0, 0.0, 0.5).unwrap()), 1.0) < 1e-15);
    assert!(rel(frak_f(&ClosedFormInputs::new(0.0, 0.5, 0.5).unwrap()), 0.5f64.sinh().powi(2)) < 1e-15);
    assert_eq!(fq_rho_balanced(&ClosedFormInputs::new(0.0, 0.0, 0.5).unwrap()), 0.0);
}

#[test]
fn loss_beam_splitter_oracle_through_partial_trace() {
    // coherent |alpha> mixed with vacuum on a beam splitter of transmission eta
    let (alpha, eta) = (1.2, 0.8);
    let space = FockSpace::uniform(2, 22).unwrap();
    let input = tensor(
        &coherent_state(c(alpha, 0.0), &FockSpace::single(22)).unwrap(),
        &FockVector::vacuum(FockSpace::single(22)),
    );
    let out = beam_splitter(eta, &space, (0, 1)).unwrap().apply(&input).unwrap();
    let kept = partial_trace(&DensityOperator::from_pure(&out), &[1]).unwrap();
    let expected = DensityOperator::from_pure(&coherent_state(c(0.0, -eta.sqrt() * alpha), &FockSpace::single(22)).unwrap());
    assert!(kept.max_abs_diff(&expected) < 1e-10);
}

#[test]
fn sampling_converges_and_is_seeded() {
    let model = CountingModel::new(&Setup::new(InputParams::new(1.0, 0.3)), 0.5, G::UpperOnly).unwrap();
    let p = model.probabilities(0.3);
    let k = 100_000;
    let counts = sample(&p, k, 7).unwrap();
    assert_eq!(counts.iter().sum::<u64>(), k as u64);
    let tv: f64 = 0.5 * counts.iter().zip(&p).map(|(&n, &q)| (n as f64 / k as f64 - q).abs()).sum::<f64>();
    assert!(tv <= 5.0 / (k as f64).sqrt(), "tv {tv}");
    assert_eq!(counts, sample(&p, k, 7).unwrap());
    assert_ne!(counts, sample(&p, k, 8).unwrap());
}

#[test]
fn mle_recovers_zero_phase_from_symmetric_counts() {
    // coherent light at tau = 1/2: p(-phi) = p(phi) under outcome relabeling is not needed;
    // the likelihood of large samples peaks at the truth within a few standard errors
    let model = CountingModel::new(&Setup::new(InputParams::new(1.2, 0.0)), 0.5, G::UpperOnly).unwrap();
    let k = 200_000;
    let counts = sample(&model.probabilities(0.0), k, 3).unwrap();
    let est = mle_estimate(&model, &counts, 0.0).unwrap();
    let sigma = 1.0 / (k as f64 * 1.44).sqrt();
    assert!(est.abs() < 4.0 * sigma, "{est} vs sigma {sigma}");
}

#[test]
fn doubling_repetitions_halves_the_variance() {
    let model = CountingModel::new(&Setup::new(InputParams::new(1.0, 0.2)), 0.5, G::UpperOnly).unwrap();
    let a = run_trials(&model, 0.3, 4000, 200, 11).unwrap();
    let b = run_trials(&model, 0.3, 8000, 200, 11).unwrap();
    let ratio = a.variance / b.variance;
    // each variance has ~10% relative noise over 200 trials
    assert!((1.4..=2.8).contains(&ratio), "{ratio}");
    assert_eq!(a, run_trials(&model, 0.3, 4000, 200, 11).unwrap());
}

#[test]
fn explicit_cutoffs_are_accepted() {
    let setup = Setup::new(InputParams::new(0.5, 0.2));
    let input = prepare_with_cutoffs(&setup, Cutoffs { pair: 20, reference: None }).unwrap();
    assert!(input.truncation_deficit < 1e-12);
}
