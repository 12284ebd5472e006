use std::f64::consts::PI;

use weakval::dist::{variance_zero_locus, SineFamily, DEFAULT_DEGENERACY};
use weakval::{HybridDistribution, Spike, VarianceLocus, C64};

const FINE: usize = 200_001;

fn spike(x: f64, w: f64) -> HybridDistribution {
    HybridDistribution::from_spikes(vec![Spike::new(x, C64::new(w, 0.0))]).unwrap()
}

#[test]
fn alternating_density_integrates_to_zero_over_two_thirds() {
    let d = HybridDistribution::from_fn(0.0, 1.0, 30_001, |f| C64::new(1.5 * PI * (3.0 * PI * f).sin(), 0.0)).unwrap();
    assert!(d.integrate(0.0, 2.0 / 3.0).unwrap().norm() < 1e-8);
    // ... yet the full integral is 1
    assert!((d.norm() - 1.0).norm() < 1e-8);
}

#[test]
fn spike_inside_interval_counts_fully() {
    assert_eq!(spike(0.5, 1.0).integrate(0.0, 1.0).unwrap(), C64::new(1.0, 0.0));
    assert_eq!(spike(0.5, 1.0).integrate(0.6, 1.0).unwrap(), C64::new(0.0, 0.0));
}

#[test]
fn sine_family_matches_closed_forms() {
    let fam = SineFamily::new(FINE);
    for eps in [0.05, 0.1, 0.5, 1.5, -0.3, 2.0] {
        let d = fam.distribution(eps);
        assert!((d.integrate(0.0, 1.0).unwrap().re - eps).abs() < 1e-12);
        let m = d.moments(2).unwrap();
        // ∫ρ = ε, ∫fρ = ε/2 − 1/2π, ∫f²ρ = ε/3 − 1/2π
        assert!((m.norm.re - eps).abs() < 1e-12);
        assert!((m.mean().unwrap().re - (0.5 - 1.0 / (2.0 * PI * eps))).abs() < 1e-9, "ε={eps}");
        assert!((m.moment(2).unwrap().re - (1.0 / 3.0 - 1.0 / (2.0 * PI * eps))).abs() < 1e-9, "ε={eps}");
        let var = 1.0 / 12.0 - 1.0 / (4.0 * PI * PI * eps * eps);
        assert!((m.variance.unwrap().re - var).abs() < 1e-8);
    }
}

#[test]
fn anomalous_means_leave_the_support() {
    let fam = SineFamily::new(FINE);
    let inside = fam.distribution(1.5).moments(1).unwrap().mean().unwrap().re;
    assert!((inside - (0.5 - 1.0 / (3.0 * PI))).abs() < 1e-9 && (0.0..=1.0).contains(&inside));
    let outside = fam.distribution(0.1).moments(1).unwrap().mean().unwrap().re;
    assert!((outside + 1.09155).abs() < 1e-5);
}

#[test]
fn one_point_distribution_has_all_moments_fixed() {
    let m = spike(0.3, -2.0).moments(5).unwrap();
    for n in 1..=5 {
        assert!((m.moment(n).unwrap() - 0.3f64.powi(n as i32)).norm() < 1e-15);
    }
    assert!(m.variance.unwrap().norm() < 1e-16);
}

#[test]
fn variance_vanishes_at_root_three_over_pi() {
    let fam = SineFamily::new(20_001);
    let root = (3.0f64).sqrt() / PI;
    for (bracket, expected) in [((0.1, 1.0), root), ((-1.0, -0.1), -root)] {
        match variance_zero_locus(|e| fam.distribution(e), bracket, 1e-10, 16).unwrap() {
            VarianceLocus::Roots(r) => {
                assert_eq!(r.len(), 1);
                assert!((r[0] - expected).abs() < 1e-8, "{r:?}");
            }
            other => panic!("{other:?}"),
        }
    }
    assert_eq!(
        variance_zero_locus(|e| spike(0.7, 1.0 + e), (0.0, 1.0), 1e-10, 8).unwrap(),
        VarianceLocus::IdenticallyZero
    );
    assert_eq!(
        variance_zero_locus(|e| fam.distribution(e), (1.0, 2.0), 1e-10, 8).unwrap(),
        VarianceLocus::Roots(vec![])
    );
}

#[test]
fn complex_pair_mean_can_be_huge() {
    let fam = SineFamily::new(FINE);
    for (e1, e2) in [(0.05, 0.05), (0.1, -0.2), (1.0, 0.3), (-0.5, 0.05), (2.0, 2.0)] {
        let d = fam.complex_pair(e1, e2);
        let (w1, w2) = d.decompose_complex().unwrap();
        assert!((w1.norm() - 1.0).norm() < 1e-12);
        assert!(w2.norm().norm() < 1e-12);
        let re_mean = w1.raw_integral(1).re;
        // Re⟨f⟩ = 1/2 − (ε₁ + ε₂)/(2π(ε₁² + ε₂²)), by direct integration of (ε₁ − iε₂)(ρ₁ + iρ₂)
        let oracle = 0.5 - (e1 + e2) / (2.0 * PI * (e1 * e1 + e2 * e2));
        assert!((re_mean - oracle).abs() < 1e-8, "({e1},{e2}): {re_mean} vs {oracle}");
        assert!((d.moments(1).unwrap().mean().unwrap().re - re_mean).abs() < 1e-10);
    }
    let big = fam.complex_pair(0.05, 0.05).decompose_complex().unwrap().0.raw_integral(1).re;
    assert!((big - (0.5 - 10.0 / PI)).abs() < 1e-8);
    let proper = fam.complex_pair(2.0, 2.0).decompose_complex().unwrap().0.raw_integral(1).re;
    assert!((0.0..=1.0).contains(&proper));
}

#[test]
fn real_positive_input_has_no_imaginary_part() {
    let d = HybridDistribution::from_fn(-1.0, 2.0, 301, |f| C64::new((-f * f).exp(), 0.0)).unwrap();
    let (w1, w2) = d.decompose_complex().unwrap();
    assert!(w2.values().iter().all(|v| v.norm() == 0.0));
    let n = d.norm().re;
    for (a, b) in w1.values().iter().zip(d.values()) {
        assert!((a - b / n).norm() < 1e-15);
    }
}

#[test]
fn moments_ignore_overall_scale() {
    let fam = SineFamily::new(2001);
    let d = fam.distribution(0.4);
    let scaled = d.scale(C64::new(-2.0, 3.5));
    let (a, b) = (d.moments(3).unwrap(), scaled.moments(3).unwrap());
    for n in 1..=3 {
        assert!((a.moment(n).unwrap() - b.moment(n).unwrap()).norm() < 1e-12);
    }
}

#[test]
fn vanishing_norm_is_flagged() {
    let fam = SineFamily::new(2001);
    let m = fam.distribution(0.0).moments(2).unwrap();
    assert!(m.degenerate);
    assert!(m.threshold > 0.0 && m.threshold <= DEFAULT_DEGENERACY * 2.0);
}

#[test]
fn hybrid_moments_combine_smooth_and_spikes() {
    // uniform on [0,1] with mass 1 plus a spike of weight 1 at 3: ⟨f⟩ = (1/2 + 3)/2
    let d = HybridDistribution::new(0.0, 0.001, vec![C64::new(1.0, 0.0); 1001], vec![Spike::new(3.0, C64::new(1.0, 0.0))])
        .unwrap();
    let m = d.moments(2).unwrap();
    assert!((m.mean().unwrap().re - 1.75).abs() < 1e-12);
    assert!((m.moment(2).unwrap().re - (1.0 / 3.0 + 9.0) / 2.0).abs() < 1e-6);
}
