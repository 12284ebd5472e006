//! Randomized invariants, one runner per property. Shared by the `properties`
//! test target and the acceptance report.

use std::f64::consts::PI;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weakval::classical::{binomial_convolution_moments, convolve_readings, generating_function, ApparatusProfile};
use weakval::dist::SineFamily;
use weakval::lam::{self, DecomposeOptions, PartialWaveSet, Prefactor};
use weakval::linalg::{braket, expm_hermitian, unitarity_defect, CMatrix, CVector};
use weakval::pathways::{path_amplitudes, watched_probabilities, PathAmplitudeSet, WatchPartition};
use weakval::quantum::*;
use weakval::readout::*;
use weakval::scattering::*;
use weakval::{HybridDistribution, Spike, C64};

pub const CASES: u32 = 128;
const SEED: [u8; 32] = *b"weakval property suite seed 0001";

pub struct Property {
    pub module: &'static str,
    pub name: &'static str,
    pub check: fn() -> Result<(), String>,
}

pub fn all() -> Vec<Property> {
    macro_rules! props {
        ($($module:literal => [$($f:ident),* $(,)?]),* $(,)?) => {
            vec![$($(Property { module: $module, name: stringify!($f), check: $f }),*),*]
        };
    }
    props![
        "improper-dist" => [
            dist_moments_ignore_scale,
            dist_proper_mean_inside_support,
            dist_decomposition_normalized,
            dist_sine_family_closed_forms,
        ],
        "classical-meter" => [
            classical_convolution_preserves_mass_and_mean,
            classical_variances_add,
            classical_fourier_identity,
            classical_binomial_moments,
        ],
        "quantum-core" => [
            quantum_unitarity,
            quantum_gauge_invariance,
            quantum_impulsive_support,
            quantum_spike_sum_matches_finite_difference,
            quantum_identity_observable,
        ],
        "meter-readout" => [
            readout_rho_non_negative,
            readout_f_and_lambda_space_agree,
            readout_transition_probability_limits,
            readout_averaged_second_moment,
            readout_sum_rule,
        ],
        "scattering-times" => [
            scattering_radial_unitarity,
            scattering_phase_time_derivative,
            scattering_causality,
            scattering_hartman_sign,
            scattering_clock_norm,
        ],
        "lam" => [
            lam_prefactor_invariance,
            lam_reconstruction,
            lam_derivative_identity,
            lam_destructive_weights,
        ],
        "pathways" => [
            pathways_probabilities_sum_to_one,
            pathways_refinement,
            pathways_positive_amplitudes,
            pathways_projector_consistency,
        ],
    ]
}

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config { cases: CASES, failure_persistence: None, max_global_rejects: 100 * CASES, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &SEED));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn random_hermitian(n: usize, scale: f64, r: &mut ChaCha8Rng) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
    (&a + a.adjoint()) * C64::new(scale, 0.0)
}

fn random_state(n: usize, r: &mut ChaCha8Rng) -> CVector {
    let v = CVector::from_fn(n, |_, _| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
    let norm = v.norm();
    v.unscale(norm)
}

fn random_basis(n: usize, r: &mut ChaCha8Rng) -> Vec<CVector> {
    let u = expm_hermitian(&random_hermitian(n, 1.0, r), 1.3);
    (0..n).map(|k| u.column(k).into_owned()).collect()
}

/// A random system with post-selection; `seed` drives all matrix entries.
fn random_transition(dim: usize, seed: u64, coupling: Coupling) -> (FiniteSystem, TransitionSpec) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let sys = FiniteSystem::new(random_hermitian(dim, 0.8, &mut r), random_hermitian(dim, 1.0, &mut r)).unwrap();
    let spec = TransitionSpec::new(random_state(dim, &mut r), Some(random_state(dim, &mut r)), 1.3, coupling).unwrap();
    (sys, spec)
}

fn coupling() -> impl Strategy<Value = Coupling> {
    prop_oneof![(0.0..1.3f64).prop_map(|t0| Coupling::Impulsive { t0 }), Just(Coupling::Window)]
}

fn gaussian_bump(mean: f64, std: f64, mass: f64) -> impl Fn(f64) -> f64 {
    move |f| mass * (-(f - mean).powi(2) / (2.0 * std * std)).exp() / (std * (2.0 * PI).sqrt())
}

/// A smooth non-negative density made of two bumps on a grid wide enough to hold both.
fn two_bumps(p: (f64, f64, f64, f64, f64)) -> HybridDistribution {
    let (m1, s1, m2, s2, mix) = p;
    let (a, b) = (m1.min(m2) - 10.0 * s1.max(s2), m1.max(m2) + 10.0 * s1.max(s2));
    let (g1, g2) = (gaussian_bump(m1, s1, mix), gaussian_bump(m2, s2, 1.0 - mix));
    HybridDistribution::from_fn(a, b, 4001, |f| C64::new(g1(f) + g2(f), 0.0)).unwrap()
}

fn bump_params() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (-2.0..2.0f64, 0.15..0.6f64, -2.0..2.0f64, 0.15..0.6f64, 0.0..1.0f64)
}

fn complex() -> impl Strategy<Value = C64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| C64::new(a, b))
}

// improper-dist

pub fn dist_moments_ignore_scale() -> Result<(), String> {
    let strategy = (prop::collection::vec(complex(), 21), prop::collection::vec((-1.0..2.0f64, complex()), 0..4), complex());
    run(strategy, |(values, spikes, c)| {
        prop_assume!(c.norm() > 0.05);
        let spikes = spikes.into_iter().map(|(x, w)| Spike::new(x, w)).collect();
        let d = HybridDistribution::new(0.0, 0.05, values, spikes).unwrap();
        prop_assume!(!d.moments(1).unwrap().degenerate && d.norm().norm() > 1e-3 * d.magnitude_scale());
        let (a, b) = (d.moments(3).unwrap(), d.scale(c).moments(3).unwrap());
        for n in 1..=3 {
            let (x, y) = (a.moment(n).unwrap(), b.moment(n).unwrap());
            prop_assert!((x - y).norm() <= 1e-9 * (1.0 + x.norm()), "n={n}: {x} vs {y}");
        }
        Ok(())
    })
}

pub fn dist_proper_mean_inside_support() -> Result<(), String> {
    let strategy = (prop::collection::vec(0.0..1.0f64, 31), prop::collection::vec((-1.0..3.0f64, 0.0..2.0f64), 0..4));
    run(strategy, |(values, spikes)| {
        let values: Vec<C64> = values.into_iter().map(|v| C64::new(v, 0.0)).collect();
        let spikes = spikes.into_iter().map(|(x, w)| Spike::new(x, C64::new(w, 0.0))).collect();
        let d = HybridDistribution::new(0.0, 1.0 / 30.0, values, spikes).unwrap();
        prop_assume!(d.norm().re > 1e-6);
        let (lo, hi) = d.support().unwrap();
        let m = d.moments(2).unwrap();
        let mean = m.mean().unwrap().re;
        prop_assert!(mean >= lo - 1e-12 && mean <= hi + 1e-12, "{mean} outside [{lo}, {hi}]");
        prop_assert!(m.variance.unwrap().re >= -1e-12);
        Ok(())
    })
}

pub fn dist_decomposition_normalized() -> Result<(), String> {
    run((prop::collection::vec(complex(), 41), complex()), |(values, shift)| {
        let values: Vec<C64> = values.into_iter().map(|v| v + shift).collect();
        let d = HybridDistribution::sampled(-1.0, 0.05, values).unwrap();
        prop_assume!(d.norm().norm() > 1e-3 * d.magnitude_scale());
        let (w1, w2) = d.decompose_complex().unwrap();
        prop_assert!((w1.norm() - 1.0).norm() < 1e-10, "∫w1 = {}", w1.norm());
        prop_assert!(w2.norm().norm() < 1e-10, "∫w2 = {}", w2.norm());
        prop_assert!(w1.values().iter().chain(w2.values()).all(|v| v.im == 0.0));
        Ok(())
    })
}

pub fn dist_sine_family_closed_forms() -> Result<(), String> {
    let fam = SineFamily::new(200_001);
    let eps = prop_oneof![0.05..3.0f64, -3.0..-0.05f64];
    run(eps, |eps| {
        let m = fam.distribution(eps).moments(2).unwrap();
        prop_assert!((m.norm.re - eps).abs() < 1e-9);
        prop_assert!((m.mean().unwrap().re - (0.5 - 1.0 / (2.0 * PI * eps))).abs() < 1e-9);
        prop_assert!((m.moment(2).unwrap().re - (1.0 / 3.0 - 1.0 / (2.0 * PI * eps))).abs() < 1e-9);
        let var = 1.0 / 12.0 - 1.0 / (4.0 * PI * PI * eps * eps);
        prop_assert!((m.variance.unwrap().re - var).abs() < 1e-8 * (1.0 + var.abs()));
        Ok(())
    })
}

// classical-meter

pub fn classical_convolution_preserves_mass_and_mean() -> Result<(), String> {
    run((bump_params(), 0.2..5.0f64), |(p, alpha)| {
        let w = two_bumps(p);
        let big = convolve_readings(&w, &ApparatusProfile::gaussian(alpha).unwrap()).unwrap();
        prop_assert!((big.norm() - w.norm()).norm() < 1e-9);
        let (a, b) = (w.moments(1).unwrap().mean().unwrap(), big.moments(1).unwrap().mean().unwrap());
        prop_assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        Ok(())
    })
}

pub fn classical_variances_add() -> Result<(), String> {
    run((bump_params(), 0.2..5.0f64), |(p, alpha)| {
        let w = two_bumps(p);
        let g = ApparatusProfile::gaussian(alpha).unwrap();
        let big = convolve_readings(&w, &g).unwrap();
        let excess = big.raw_integral(2).re - g.density_second_moment() - w.raw_integral(2).re;
        prop_assert!(excess.abs() < 1e-8, "{excess}");
        Ok(())
    })
}

pub fn classical_fourier_identity() -> Result<(), String> {
    run((bump_params(), 0.2..3.0f64, -2.5..2.5f64), |(p, alpha, lambda)| {
        let w = two_bumps(p);
        let big = convolve_readings(&w, &ApparatusProfile::gaussian(alpha).unwrap()).unwrap();
        let g_hat = (-lambda * lambda * alpha * alpha / 4.0).exp();
        let (lhs, rhs) = (generating_function(&big, lambda), generating_function(&w, lambda) * g_hat);
        prop_assert!((lhs - rhs).norm() < 1e-8, "{lhs} vs {rhs}");
        Ok(())
    })
}

pub fn classical_binomial_moments() -> Result<(), String> {
    run((bump_params(), 0.2..3.0f64), |(p, alpha)| {
        let w = two_bumps(p);
        let g = ApparatusProfile::gaussian(alpha).unwrap();
        let big = convolve_readings(&w, &g).unwrap();
        let wm: Vec<f64> = (0..=4).map(|n| w.raw_integral(n).re).collect();
        let gm = g.density_moments(4);
        for n in 1..=4usize {
            let direct = big.raw_integral(n as i32).re;
            let expanded = binomial_convolution_moments(&gm, &wm, n);
            prop_assert!((expanded - direct).abs() < 1e-8 * (1.0 + direct.abs()), "n={n}: {expanded} vs {direct}");
        }
        Ok(())
    })
}

// quantum-core

pub fn quantum_unitarity() -> Result<(), String> {
    run((2..5usize, any::<u64>(), coupling(), -20.0..20.0f64), |(dim, seed, c, lambda)| {
        let (sys, spec) = random_transition(dim, seed, c);
        let defect = unitarity_defect(&evolve_lambda(&sys, &spec, lambda));
        prop_assert!(defect < 1e-10, "{defect}");
        Ok(())
    })
}

pub fn quantum_gauge_invariance() -> Result<(), String> {
    run((2..5usize, any::<u64>(), coupling(), 0.0..2.0 * PI, 0.0..2.0 * PI), |(dim, seed, c, a, b)| {
        let (sys, spec) = random_transition(dim, seed, c);
        let psi1 = spec.psi1.clone().unwrap();
        prop_assume!(transition_amplitude(&sys, &spec, 0.0).unwrap().norm() > 0.05);
        let turned = TransitionSpec::new(
            &spec.psi0 * C64::from_polar(1.0, a),
            Some(psi1 * C64::from_polar(1.0, b)),
            spec.total_time,
            spec.coupling,
        )
        .unwrap();
        for n in 1..=2 {
            let (x, y) = (weak_value(&sys, &spec, n).unwrap(), weak_value(&sys, &turned, n).unwrap());
            prop_assert!((x - y).norm() < 1e-10 * (1.0 + x.norm()), "order {n}: {x} vs {y}");
        }
        Ok(())
    })
}

pub fn quantum_impulsive_support() -> Result<(), String> {
    run((2..5usize, any::<u64>(), 0.0..1.3f64), |(dim, seed, t0)| {
        let (sys, spec) = random_transition(dim, seed, Coupling::Impulsive { t0 });
        let phi = amplitude_distribution(&sys, &spec, &FourierOptions::default()).unwrap();
        let eig = sys.eigenvalues();
        prop_assert!(phi.values().iter().all(|v| v.norm() == 0.0), "impulsive Φ has a smooth part");
        prop_assert_eq!(phi.spikes().len(), eig.len());
        for s in phi.spikes() {
            prop_assert!(eig.contains(&s.location), "spike at {} is not an eigenvalue", s.location);
        }
        Ok(())
    })
}

pub fn quantum_spike_sum_matches_finite_difference() -> Result<(), String> {
    run((2..5usize, any::<u64>(), 0.0..1.3f64), |(dim, seed, t0)| {
        let (sys, spec) = random_transition(dim, seed, Coupling::Impulsive { t0 });
        let phi = amplitude_distribution(&sys, &spec, &FourierOptions::default()).unwrap();
        let total: C64 = phi.spikes().iter().map(|s| s.weight).sum();
        prop_assume!(total.norm() > 0.05);
        let from_spikes = phi.spikes().iter().map(|s| s.weight * s.location).sum::<C64>() / total;
        let fd = weak_value_fd(&sys, &spec, 1, 1e-4).unwrap();
        prop_assert!((from_spikes - fd).norm() < 1e-6 * from_spikes.norm().max(1.0), "{from_spikes} vs {fd}");
        Ok(())
    })
}

pub fn quantum_identity_observable() -> Result<(), String> {
    run((2..5usize, any::<u64>()), |(dim, seed)| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let sys = FiniteSystem::new(random_hermitian(dim, 0.8, &mut r), CMatrix::identity(dim, dim)).unwrap();
        let spec =
            TransitionSpec::new(random_state(dim, &mut r), Some(random_state(dim, &mut r)), 1.3, Coupling::Window).unwrap();
        prop_assume!(transition_amplitude(&sys, &spec, 0.0).unwrap().norm() > 0.05);
        let phi = amplitude_distribution(&sys, &spec, &FourierOptions::default()).unwrap();
        prop_assert_eq!(phi.spikes().len(), 1);
        prop_assert!((phi.spikes()[0].location - 1.0).abs() < 1e-12);
        prop_assert!(phi.values().iter().all(|v| v.norm() < 1e-12));
        let f = weak_value(&sys, &spec, 1).unwrap();
        prop_assert!((f - 1.0).norm() < 1e-10, "{f}");
        Ok(())
    })
}

// meter-readout

pub fn readout_rho_non_negative() -> Result<(), String> {
    run((2..4usize, any::<u64>(), coupling(), 0.2..5.0f64), |(dim, seed, c, alpha)| {
        let (sys, spec) = random_transition(dim, seed, c);
        let r = read_meter(&sys, &spec, &ApparatusProfile::gaussian(alpha).unwrap()).unwrap();
        prop_assert!(r.rho_f.values().iter().all(|v| v.re >= 0.0 && v.im == 0.0));
        prop_assert!(r.rho_f.norm().re > 0.0);
        Ok(())
    })
}

pub fn readout_f_and_lambda_space_agree() -> Result<(), String> {
    run((2..4usize, any::<u64>(), coupling(), 0.5..3.0f64), |(dim, seed, c, alpha)| {
        let (sys, spec) = random_transition(dim, seed, c);
        let g = ApparatusProfile::gaussian(alpha).unwrap();
        let r = read_meter(&sys, &spec, &g).unwrap();
        let (m, s) = lambda_space_moments(&sys, &spec, &g).unwrap();
        prop_assert!((m - r.mean).abs() < 1e-6 * r.mean.abs().max(1.0), "{m} vs {}", r.mean);
        prop_assert!(rel(s, r.second_moment) < 1e-6, "{s} vs {}", r.second_moment);
        Ok(())
    })
}

pub fn readout_transition_probability_limits() -> Result<(), String> {
    run((2..4usize, any::<u64>(), 0.0..1.3f64), |(dim, seed, t0)| {
        let (sys, spec) = random_transition(dim, seed, Coupling::Impulsive { t0 });
        let psi1 = spec.psi1.clone().unwrap();
        let unperturbed = braket(&psi1, &sys.propagator(spec.total_time), &spec.psi0).norm_sqr();
        prop_assume!(unperturbed > 0.05);
        // strong reading: the eigenspace paths no longer interfere
        let before = sys.propagator(t0) * &spec.psi0;
        let after = sys.propagator(spec.total_time - t0);
        let strong: f64 = sys.spectrum().iter().map(|(_, p)| braket(&psi1, &(&after * p), &before).norm_sqr()).sum();
        let read = |alpha: f64| read_meter(&sys, &spec, &ApparatusProfile::gaussian(alpha).unwrap()).unwrap();
        let sharp = read(1e-3).transition_probability;
        prop_assert!((sharp - strong).abs() < 1e-8, "{sharp} vs {strong}");
        let weak = read(300.0).transition_probability;
        prop_assert!(rel(weak, unperturbed) < 1e-3, "{weak} vs {unperturbed}");
        Ok(())
    })
}

pub fn readout_averaged_second_moment() -> Result<(), String> {
    run((any::<u64>(), 0.0..1.0f64, 10.0..30.0f64), |(seed, t0, alpha)| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let sys = FiniteSystem::new(random_hermitian(3, 0.6, &mut r), random_hermitian(3, 1.0, &mut r)).unwrap();
        let spec = TransitionSpec::new(random_state(3, &mut r), None, 1.0, Coupling::Impulsive { t0 }).unwrap();
        let basis = random_basis(3, &mut r);
        let avg = average_over_final_states(&sys, &spec, &basis, &FourierOptions::default()).unwrap();
        let g = ApparatusProfile::gaussian(alpha).unwrap();
        let (_, s) = direct_average_readings(&sys, &spec, &basis, &g).unwrap();
        let pred = avg.predicted_second_moment(&g);
        prop_assert!(rel(s, pred) < 1e-4, "α={alpha}: {s} vs {pred}");
        Ok(())
    })
}

pub fn readout_sum_rule() -> Result<(), String> {
    run((2..5usize, any::<u64>(), coupling(), -10.0..10.0f64), |(dim, seed, c, lambda)| {
        let (sys, spec) = random_transition(dim, seed, c);
        let spec = spec.with_post_selection(None).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let total = sum_rule(&sys, &spec, &random_basis(dim, &mut r), lambda);
        prop_assert!((total - 1.0).abs() < 1e-10, "{total}");
        Ok(())
    })
}

// scattering-times

pub fn scattering_radial_unitarity() -> Result<(), String> {
    run((0.05..5.0f64, -5.0..5.0f64, 0.2..3.0f64), |(k, omega, radius)| {
        let s = transmission(&ScatterModel::RadialSquare { omega, radius }, k).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-12, "|S| = {}", s.norm());
        Ok(())
    })
}

pub fn scattering_phase_time_derivative() -> Result<(), String> {
    let omega = prop_oneof![0.05..3.0f64, -3.0..-0.05f64];
    run((0.2..3.0f64, omega), |(p, omega)| {
        let t = phase_time(&ScatterModel::DeltaBarrier { omega }, p).unwrap();
        let exact = omega / (p * (p * p + omega * omega));
        prop_assert!(rel(t, exact) < 1e-6, "{t} vs {exact}");
        Ok(())
    })
}

pub fn scattering_causality() -> Result<(), String> {
    let model = prop_oneof![
        (0.1..3.0f64).prop_map(|omega| ScatterModel::DeltaBarrier { omega }),
        (0.1..3.0f64, 0.5..2.0f64).prop_map(|(omega, width)| ScatterModel::RectangularBarrier { omega, width }),
    ];
    run((model, 0.5..2.0f64), |(model, p)| {
        let (grid, d) = delay_amplitude_auto(&model, p).unwrap();
        let peak = d.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let leak = d.values().iter().enumerate().filter(|(j, _)| grid.x(*j) > grid.dx).map(|(_, v)| v.norm()).fold(0.0, f64::max);
        prop_assert!(leak < 1e-6 * peak, "{model:?} p={p}: {leak} vs {peak}");
        Ok(())
    })
}

pub fn scattering_hartman_sign() -> Result<(), String> {
    run((0.5..2.0f64, 0.6..3.0f64, 0.5..2.0f64), |(p, excess, width)| {
        let omega = excess * p * p;
        let tau = phase_time(&ScatterModel::OpaqueApprox { omega, width }, p).unwrap();
        prop_assert!(tau < 0.0, "τ = {tau}");
        let model = ScatterModel::RectangularBarrier { omega, width };
        let (grid, d) = delay_amplitude_auto(&model, p).unwrap();
        let peak = d.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let leak = d.values().iter().enumerate().filter(|(j, _)| grid.x(*j) > grid.dx).map(|(_, v)| v.norm()).fold(0.0, f64::max);
        prop_assert!(leak < 1e-6 * peak, "support reaches x > 0: {leak} vs {peak}");
        Ok(())
    })
}

pub fn scattering_clock_norm() -> Result<(), String> {
    run((1..400u32, 0.5..3.0f64, -3.0..3.0f64, 0.5..2.0f64), |(twice_j, k, omega, c)| {
        let j = (twice_j as f64 / 2.0).max(1.0);
        let model = ScatterModel::RadialSquare { omega, radius: 1.0 };
        let clock = SpinClock::new(j, c / j).unwrap();
        let r = larmor_clock(&model, k, &clock).unwrap();
        prop_assert!((r.final_norm - 1.0).abs() < 1e-10, "j={j}: {}", r.final_norm);
        Ok(())
    })
}

// lam

fn even_waves() -> impl Strategy<Value = Vec<C64>> {
    (1..7usize).prop_flat_map(|n| {
        prop::collection::vec((0.05..1.0f64, 0.0..2.0 * PI), n).prop_map(|v| {
            let mut s = Vec::new();
            for (mag, phase) in v {
                s.push(C64::from_polar(mag, phase));
                s.push(C64::new(0.0, 0.0));
            }
            s.pop();
            s
        })
    })
}

fn interior_theta() -> impl Strategy<Value = f64> {
    lam::THETA_MIN..lam::THETA_MAX
}

fn nonzero_scale() -> impl Strategy<Value = C64> {
    (0.1..10.0f64, 0.0..2.0 * PI).prop_map(|(m, a)| C64::from_polar(m, a))
}

pub fn lam_prefactor_invariance() -> Result<(), String> {
    run((even_waves(), interior_theta(), nonzero_scale()), |(s, theta, c)| {
        let base = PartialWaveSet::new(0.0, 1.0, s).unwrap();
        let scaled = base.clone().with_prefactor(Prefactor::Custom([c.re, c.im]));
        prop_assume!(lam::dcs(&base, theta) > 1e-8);
        let opts = DecomposeOptions::default();
        let (a, b) = (lam::decompose(&base, theta, &opts).unwrap(), lam::decompose(&scaled, theta, &opts).unwrap());
        prop_assert!((a.lam_direct - b.lam_direct).abs() < 1e-9 * (1.0 + a.lam_direct.abs()));
        for (x, y) in a.w_l.iter().zip(&b.w_l) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
        }
        Ok(())
    })
}

pub fn lam_reconstruction() -> Result<(), String> {
    run((even_waves(), interior_theta()), |(s, theta)| {
        let set = PartialWaveSet::new(0.0, 1.0, s).unwrap();
        prop_assume!(lam::dcs(&set, theta) > 1e-8);
        let d = lam::decompose(&set, theta, &DecomposeOptions::default()).unwrap();
        prop_assert!(d.reconstruction_error < 1e-6, "{}", d.reconstruction_error);
        prop_assert!((d.weight_sum() - 1.0).abs() < 1e-6);
        Ok(())
    })
}

pub fn lam_derivative_identity() -> Result<(), String> {
    let waves = prop::collection::vec((0.05..1.0f64, 0.0..2.0 * PI), 1..9)
        .prop_map(|v| v.into_iter().map(|(m, a)| C64::from_polar(m, a)).collect::<Vec<_>>());
    run((waves, interior_theta()), |(s, theta)| {
        let set = PartialWaveSet::new(0.0, 1.0, s).unwrap();
        let peak = lam::theta_grid(64).iter().map(|&t| lam::dcs(&set, t)).fold(0.0, f64::max);
        prop_assume!(lam::dcs(&set, theta) > 1e-2 * peak);
        let (a, b) = (lam::lam(&set, theta).unwrap(), lam::lam_finite_difference(&set, theta, 1e-3).unwrap());
        prop_assert!((a - b).abs() < 1e-5 * (1.0 + a.abs()), "{a} vs {b}");
        Ok(())
    })
}

pub fn lam_destructive_weights() -> Result<(), String> {
    // Two even modes e^{iΛθ} + r e^{i(Λ′θ + π)} nearly cancel at θ = π/2 when Λ′ − Λ ≡ 0 mod 4.
    run((0.5..0.99f64, 0..4i64, 1..4i64), |(r, low, gap)| {
        let (l1, l2) = ((2 * low) as f64, (2 * low + 4 * gap) as f64);
        let amp = lam::PlaneWaves::new(vec![(C64::new(1.0, 0.0), l1), (C64::new(-r, 0.0), l2)]);
        let d = lam::decompose(&amp, PI / 2.0, &DecomposeOptions::default()).unwrap();
        prop_assert!(d.min_weight() < 0.0, "weights {:?}", d.w_l);
        prop_assert!((d.weight_sum() - 1.0).abs() < 1e-6);
        Ok(())
    })
}

// pathways

fn amplitudes() -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(complex(), 2..8)
}

/// A random partition of 0..d: each path draws a group label.
fn partition_of(d: usize, labels: &[usize]) -> WatchPartition {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); d];
    for (n, &l) in labels.iter().take(d).enumerate() {
        groups[l % d].push(n);
    }
    WatchPartition::new(groups.into_iter().filter(|g| !g.is_empty()).collect(), d).unwrap()
}

pub fn pathways_probabilities_sum_to_one() -> Result<(), String> {
    run((amplitudes(), prop::collection::vec(any::<usize>(), 8)), |(a, labels)| {
        let set = PathAmplitudeSet::numbered(a).unwrap();
        let part = partition_of(set.len(), &labels);
        match watched_probabilities(&set, &part) {
            Ok(p) => prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{p:?}"),
            Err(e) => prop_assert!(e.is_numerical(), "{e}"),
        }
        Ok(())
    })
}

pub fn pathways_refinement() -> Result<(), String> {
    run((amplitudes(), prop::collection::vec(any::<usize>(), 8), any::<usize>()), |(a, labels, pick)| {
        let set = PathAmplitudeSet::numbered(a).unwrap();
        let coarse = partition_of(set.len(), &labels);
        let g = pick % coarse.groups.len();
        prop_assume!(coarse.groups[g].len() > 1);
        let mut groups = coarse.groups.clone();
        let split = groups.remove(g);
        let (head, tail) = split.split_at(1);
        groups.push(head.to_vec());
        groups.push(tail.to_vec());
        let fine = WatchPartition::new(groups, set.len()).unwrap();
        if let Ok(p) = watched_probabilities(&set, &fine) {
            prop_assert!(p.iter().all(|&x| (0.0..=1.0 + 1e-15).contains(&x)), "{p:?}");
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        Ok(())
    })
}

pub fn pathways_positive_amplitudes() -> Result<(), String> {
    let positive = prop::collection::vec(0.01..5.0f64, 2..8);
    run((positive, prop::collection::vec(any::<usize>(), 8)), |(a, labels)| {
        let set = PathAmplitudeSet::from_real(&a).unwrap();
        let p = watched_probabilities(&set, &partition_of(set.len(), &labels)).unwrap();
        prop_assert!(p.iter().all(|&x| x > 0.0), "{p:?}");
        Ok(())
    })
}

pub fn pathways_projector_consistency() -> Result<(), String> {
    run((3..6usize, any::<u64>(), any::<usize>()), |(dim, seed, watched)| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (psi0, psi1) = (random_state(dim, &mut r), random_state(dim, &mut r));
        let values: Vec<f64> = (0..dim).map(|n| n as f64).collect();
        let sys = FiniteSystem::new(CMatrix::zeros(dim, dim), diagonal(&values)).unwrap();
        let set = path_amplitudes(&sys, &psi0, &psi1).unwrap();
        let k = watched % dim;
        let Ok(p) = watched_probabilities(&set, &WatchPartition::watch(&[k], dim).unwrap()) else {
            return Ok(());
        };
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        let projector = FiniteSystem::new(CMatrix::zeros(dim, dim), diagonal(&v)).unwrap();
        let spec = TransitionSpec::new(psi0, Some(psi1), 1.0, Coupling::Impulsive { t0: 0.5 }).unwrap();
        let phi = amplitude_distribution(&projector, &spec, &FourierOptions::default()).unwrap();
        let weight = |loc: f64| {
            phi.spikes().iter().filter(|s| (s.location - loc).abs() < 1e-9).map(|s| s.weight).sum::<C64>().norm_sqr()
        };
        let strong = weight(1.0) / (weight(1.0) + weight(0.0));
        prop_assert!((p[0] - strong).abs() < 1e-12, "{} vs {strong}", p[0]);
        Ok(())
    })
}
