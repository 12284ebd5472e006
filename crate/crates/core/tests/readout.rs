mod common;

use common::*;
use weakval::classical::ApparatusProfile;
use weakval::linalg::{braket, CMatrix};
use weakval::numerics::{central_derivative, C64};
use weakval::quantum::*;
use weakval::readout::*;

fn random_window(n: usize, seed: u64) -> (FiniteSystem, TransitionSpec) {
    let mut r = rng(seed);
    let sys = FiniteSystem::new(random_hermitian(n, 0.8, &mut r), random_hermitian(n, 1.0, &mut r)).unwrap();
    let spec = TransitionSpec::new(random_state(n, &mut r), None, 1.4, Coupling::Window).unwrap();
    (sys, spec)
}

#[test]
fn two_level_mean_matches_closed_form_over_grid() {
    for &eps in &[0.05, 0.1, 0.3, 0.7] {
        let (sys, spec) = two_level_example(eps).unwrap();
        for &alpha in &[0.2, 0.5, 1.0, 2.0, 5.0, 12.0] {
            let r = read_meter(&sys, &spec, &ApparatusProfile::gaussian(alpha).unwrap()).unwrap();
            let exact = two_level_closed_form(eps, alpha);
            assert!((r.mean - exact).abs() < 1e-8, "eps {eps} alpha {alpha}: {} vs {exact}", r.mean);
        }
    }
}

#[test]
fn accurate_meter_sees_both_levels_equally() {
    let (sys, spec) = two_level_example(1e-6).unwrap();
    let ideal = read_meter(&sys, &spec, &ApparatusProfile::ideal()).unwrap();
    assert!((ideal.mean - 1.5).abs() < 1e-6);
    let sharp = read_meter(&sys, &spec, &ApparatusProfile::gaussian(0.05).unwrap()).unwrap();
    assert!((sharp.mean - 1.5).abs() < 1e-6);
}

#[test]
fn alpha_fifty_reading_follows_the_exact_formula() {
    // The finite-α reading sits visibly above the weak value −8.
    let (sys, spec) = two_level_example(0.1).unwrap();
    let r = read_meter(&sys, &spec, &ApparatusProfile::gaussian(50.0).unwrap()).unwrap();
    assert!((r.mean - two_level_closed_form(0.1, 50.0)).abs() < 1e-8);
    assert!((r.mean + 7.67).abs() < 5e-3);
}

#[test]
fn transition_probability_limits() {
    let eps = 0.1;
    let (sys, spec) = two_level_example(eps).unwrap();
    let n2 = 1.0 / (2.0 * (1.0 + (1.0 - eps) * (1.0 - eps)));
    let strong = read_meter(&sys, &spec, &ApparatusProfile::gaussian(1e-3).unwrap()).unwrap();
    assert!((strong.transition_probability - n2 * (1.0 + 0.81)).abs() < 1e-8);
    let unperturbed = n2 * eps * eps;
    let weak = read_meter(&sys, &spec, &ApparatusProfile::gaussian(500.0).unwrap()).unwrap();
    assert!(rel_err(weak.transition_probability, unperturbed) < 1e-3);
}

#[test]
fn orthogonal_post_selection_with_ideal_meter_is_an_error() {
    let sys = FiniteSystem::new(CMatrix::zeros(2, 2), diagonal(&[1.0, 2.0])).unwrap();
    let spec = TransitionSpec::new(real_state(&[1.0, 0.0]), Some(real_state(&[0.0, 1.0])), 1.0, Coupling::Impulsive { t0: 0.5 })
        .unwrap();
    assert!(read_meter(&sys, &spec, &ApparatusProfile::ideal()).is_err());
}

#[test]
fn eigenstate_post_selection_second_moment_is_exact() {
    let sys = FiniteSystem::new(CMatrix::zeros(2, 2), diagonal(&[1.0, 2.0])).unwrap();
    let spec = TransitionSpec::new(real_state(&[1.0, 1.0]), Some(real_state(&[0.0, 1.0])), 1.0, Coupling::Impulsive { t0: 0.3 })
        .unwrap();
    for &alpha in &[1.0, 3.0, 10.0] {
        let g = ApparatusProfile::gaussian(alpha).unwrap();
        let pred = asymptotic_moments(&sys, &spec, &g).unwrap();
        let read = read_meter(&sys, &spec, &g).unwrap();
        assert!((pred.second_moment - (alpha * alpha / 4.0 + 4.0)).abs() < 1e-8);
        assert!(rel_err(read.second_moment, pred.second_moment) < 1e-8);
    }
}

#[test]
fn gaussian_c_factor_is_one_half() {
    let c = ApparatusProfile::gaussian(3.0).unwrap().c_factor();
    assert!((c - 0.5).abs() < 1e-8, "{c}");
}

#[test]
fn mean_converges_to_weak_value_at_least_linearly() {
    let (sys, spec) = two_level_example(0.3).unwrap();
    let wv = weak_value(&sys, &spec, 1).unwrap().re;
    let alphas = [10.0, 20.0, 40.0, 80.0];
    let errs: Vec<f64> = alphas
        .iter()
        .map(|&a| (read_meter(&sys, &spec, &ApparatusProfile::gaussian(a).unwrap()).unwrap().mean - wv).abs())
        .collect();
    let x: Vec<f64> = alphas.iter().map(|a: &f64| a.ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (slope, _) = weakval::numerics::linear_fit(&x, &y);
    assert!(slope <= -1.0, "slope {slope}");
}

#[test]
fn second_moment_expansion_matches_two_level_reading() {
    let (sys, spec) = two_level_example(0.3).unwrap();
    let err = |alpha: f64| {
        let g = ApparatusProfile::gaussian(alpha).unwrap();
        let pred = asymptotic_moments(&sys, &spec, &g).unwrap();
        let read = read_meter(&sys, &spec, &g).unwrap();
        (pred.second_moment - read.second_moment).abs()
    };
    let (e1, e2) = (err(20.0), err(40.0));
    assert!(e2 < 0.6 * e1 && e2 < 0.05, "{e1} {e2}");
}

#[test]
fn f_space_and_lambda_space_means_agree() {
    let (sys, spec) = two_level_example(0.4).unwrap();
    let g = ApparatusProfile::gaussian(1.5).unwrap();
    let r = read_meter(&sys, &spec, &g).unwrap();
    let (m, s) = lambda_space_moments(&sys, &spec, &g).unwrap();
    assert!(rel_err(m, r.mean) < 1e-6, "{m} vs {}", r.mean);
    assert!(rel_err(s, r.second_moment) < 1e-6, "{s} vs {}", r.second_moment);

    let (sys, spec) = random_window(2, 5);
    let spec = spec.with_post_selection(Some(real_state(&[0.8, 0.3]))).unwrap();
    let r = read_meter(&sys, &spec, &g).unwrap();
    let (m, _) = lambda_space_moments(&sys, &spec, &g).unwrap();
    assert!(rel_err(m, r.mean) < 1e-6, "{m} vs {}", r.mean);
}

#[test]
fn rho_is_non_negative() {
    let (sys, spec) = random_window(3, 9);
    let spec = spec.with_post_selection(Some(real_state(&[1.0, -0.5, 0.2]))).unwrap();
    let r = read_meter(&sys, &spec, &ApparatusProfile::gaussian(0.7).unwrap()).unwrap();
    assert!(r.rho_f.values().iter().all(|v| v.re >= 0.0 && v.im == 0.0));
}

#[test]
fn impulsive_average_is_the_born_distribution() {
    let mut r = rng(3);
    let sys = FiniteSystem::new(random_hermitian(3, 1.0, &mut r), diagonal(&[-1.0, 0.5, 2.0])).unwrap();
    let spec = TransitionSpec::new(random_state(3, &mut r), None, 2.0, Coupling::Impulsive { t0: 0.7 }).unwrap();
    let avg = average_over_final_states(&sys, &spec, &random_basis(3, &mut r), &FourierOptions::default()).unwrap();
    let psi_t0 = sys.propagator(0.7) * &spec.psi0;
    for (k, s) in avg.averaged_distribution.spikes().iter().enumerate() {
        let born = psi_t0[k].norm_sqr();
        assert!((s.weight - C64::new(born, 0.0)).norm() < 1e-12);
    }
    assert!((avg.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-10);
}

#[test]
fn sum_rules_hold_for_random_systems() {
    let (sys, spec) = random_window(4, 21);
    let mut r = rng(22);
    let basis = random_basis(4, &mut r);
    let avg = average_over_final_states(&sys, &spec, &basis, &FourierOptions::default()).unwrap();
    assert!(avg.mean.im.abs() < 1e-12, "{}", avg.mean);
    let direct: f64 = avg
        .per_state
        .iter()
        .zip(&avg.probabilities)
        .map(|(w, p)| p * w.unwrap().0.norm_sqr())
        .sum();
    assert!(rel_err(avg.second.re, direct) < 1e-10);
    for l in [-3.0, -0.5, 0.0, 1.2, 7.0] {
        assert!((sum_rule(&sys, &spec, &basis, l) - 1.0).abs() < 1e-10);
    }
    assert!((avg.w1.norm().re - 1.0).abs() < 1e-8);
    assert!(avg.w2.norm().re.abs() < 1e-8);
    let (m, s) = lambda_route_moments(&sys, &spec);
    assert!((m - avg.mean).norm() < 1e-10 && (s - avg.second).norm() < 1e-10);
}

#[test]
fn non_orthonormal_basis_reports_gram_defect() {
    let (sys, spec) = random_window(2, 1);
    let basis = vec![real_state(&[1.0, 0.0]), real_state(&[1.0, 1.0])];
    let err = average_over_final_states(&sys, &spec, &basis, &FourierOptions::default()).unwrap_err();
    assert!(err.to_string().contains("Gram defect"));
}

#[test]
fn time_integrals_for_static_and_commuting_cases() {
    let mut r = rng(4);
    let a = random_hermitian(3, 1.0, &mut r);
    let psi0 = random_state(3, &mut r);
    let expect_a = braket(&psi0, &a, &psi0);
    let sys = FiniteSystem::new(CMatrix::zeros(3, 3), a.clone()).unwrap();
    let spec = TransitionSpec::new(psi0.clone(), None, 2.0, Coupling::Window).unwrap();
    let (m, _) = time_integral_moments(&sys, &spec, 20).unwrap();
    assert!((m - expect_a).norm() < 1e-12);

    let h = &a * &a * C64::new(0.3, 0.0) - &a * C64::new(0.4, 0.0);
    let sys = FiniteSystem::new(h, a.clone()).unwrap();
    let (_, s) = time_integral_moments(&sys, &spec, 20).unwrap();
    assert!((s - braket(&psi0, &(&a * &a), &psi0)).norm() < 1e-10, "{s}");
}

#[test]
fn time_integrals_agree_with_lambda_finite_differences() {
    let (sys, spec) = random_window(3, 77);
    let (m, s) = time_integral_moments(&sys, &spec, 40).unwrap();
    let target = sys.propagator(spec.total_time) * &spec.psi0;
    let overlap = |l: f64| braket(&target, &evolve_lambda(&sys, &spec, l), &spec.psi0);
    let fd1 = C64::new(0.0, 1.0) * central_derivative(overlap, 0.0, 1e-4, 1);
    let fd2 = -central_derivative(overlap, 0.0, 1e-3, 2);
    assert!((m - fd1).norm() < 1e-6 * fd1.norm(), "{m} vs {fd1}");
    assert!((s - fd2).norm() < 1e-6 * fd2.norm(), "{s} vs {fd2}");
}

#[test]
fn averaged_second_moment_matches_direct_readings() {
    let mut r = rng(8);
    let sys = FiniteSystem::new(random_hermitian(3, 0.6, &mut r), diagonal(&[-1.0, 0.0, 1.5])).unwrap();
    let spec = TransitionSpec::new(random_state(3, &mut r), None, 1.0, Coupling::Impulsive { t0: 0.4 }).unwrap();
    let basis = standard_basis(3);
    let avg = average_over_final_states(&sys, &spec, &basis, &FourierOptions::default()).unwrap();
    for alpha in [10.0, 20.0] {
        let g = ApparatusProfile::gaussian(alpha).unwrap();
        let (m, s) = direct_average_readings(&sys, &spec, &basis, &g).unwrap();
        let pred = avg.predicted_second_moment(&g);
        assert!(rel_err(s, pred) < 1e-4, "alpha {alpha}: {s} vs {pred}");
        assert!((m - avg.predicted_mean()).abs() < 1e-2, "{m}");
    }
}

#[test]
fn detector_on_quantum_systems() {
    let sys = FiniteSystem::new(CMatrix::zeros(2, 2), CMatrix::identity(2, 2)).unwrap();
    let spec = TransitionSpec::new(real_state(&[0.6, 0.8]), None, 1.0, Coupling::Window).unwrap();
    let report = zero_variance_detector(&UnperturbedOverlap::new(&sys, &spec), &DetectorGrid::default()).unwrap();
    assert_eq!(report.classification, Sharpness::GenuinelySharp);
    assert!((report.second_moment - 1.0).abs() < 1e-7 && (report.mean - 1.0).abs() < 1e-8);

    let (sys, spec) = two_level_example(0.1).unwrap();
    let report = zero_variance_detector(&UnperturbedOverlap::new(&sys, &spec), &DetectorGrid::default()).unwrap();
    assert_eq!(report.classification, Sharpness::PreconditionViolated);
}

#[test]
fn surface_csv_has_header_and_rows() {
    let pts = two_level_surface(&[0.5, 5.0], &[0.1, 0.2]).unwrap();
    let mut buf = Vec::new();
    write_surface_csv(&pts, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("alpha,epsilon,mean_f\n"));
    assert_eq!(text.lines().count(), 5);
}
