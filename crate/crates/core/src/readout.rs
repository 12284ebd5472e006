//! Quantum meter readings: Ψ(f) = G⋆Φ, ρ(f) = |Ψ(f)|², exact and large-α moments, and
//! averages over an uncontrolled final state.

use std::io::Write;

use serde::Serialize;

use crate::classical::ApparatusProfile;
use crate::dist::{HybridDistribution, Spike};
use crate::error::{Error, Result};
use crate::linalg::{braket, CMatrix, CVector};
use crate::numerics::{
    central_derivative, fourier_synthesis, gauss_legendre, linear_fit, simpson_weights, unwrap_phase, C64, I,
};
use crate::quantum::{
    amplitude_distribution, evolve_lambda, lambda_taylor, transition_amplitude, weak_value, Coupling, FiniteSystem,
    FourierOptions, TransitionSpec, AMPLITUDE_THRESHOLD,
};

/// Output grid step of Ψ(f) in units of α.
const STEP_PER_ALPHA: f64 = 1.0 / 20.0;

/// Finite-difference step for first λ-derivatives.
pub const LAMBDA_STEP: f64 = 1e-4;
/// Second derivatives use a wider step: at 1e-4 rounding already costs ~1e-7.
pub const LAMBDA_STEP_SECOND: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ReadoutResult {
    /// Meter amplitude Ψ(f) for the post-selected transition.
    pub psi_f: HybridDistribution,
    /// ρ(f) = |Ψ(f)|² (spikes with weights |w_k|² for an ideal meter).
    pub rho_f: HybridDistribution,
    pub mean: f64,
    pub second_moment: f64,
    /// ∫ρ / ∫G²: probability of the post-selected outcome with the meter in place.
    pub transition_probability: f64,
    /// (f̄, f̄²) when the unperturbed transition amplitude is not degenerate.
    pub weak_reference: Option<(C64, C64)>,
}

/// Ψ(f) = ∫ G(f − f′) Φ(f′) df′ with G(f) = g(f/α).
pub fn convolve_amplitude(phi: &HybridDistribution, g: &ApparatusProfile) -> Result<HybridDistribution> {
    if g.is_ideal() {
        return Ok(phi.clone());
    }
    let (lo, hi) = phi.support().ok_or_else(|| Error::invalid("Φ(f) is empty"))?;
    let alpha = g.alpha();
    let reach = g.half_width();
    let smooth = phi.values().len() >= 2;
    let h_phi = phi.grid_step();
    let step = if smooth { (alpha * STEP_PER_ALPHA).max(h_phi) } else { alpha * STEP_PER_ALPHA };
    let start = lo - reach;
    let n = ((hi + reach - start) / step).ceil() as usize + 1;
    let n_phi = phi.values().len();
    let narrow = smooth && alpha < 2.0 * h_phi;
    let values = (0..n)
        .map(|i| {
            let x = start + i as f64 * step;
            let mut v: C64 = phi
                .spikes()
                .iter()
                .filter(|s| (x - s.location).abs() <= reach)
                .map(|s| s.weight * g.amplitude(x - s.location))
                .sum();
            if narrow {
                // Kernel narrower than Φ's grid: G acts as a scaled delta.
                v += phi.smooth_at(x) * g.amplitude_integral();
            } else if smooth {
                let j0 = (((x - reach - phi.grid_start()) / h_phi).floor().max(0.0)) as usize;
                let j1 = ((((x + reach - phi.grid_start()) / h_phi).ceil()) as usize).min(n_phi - 1);
                for j in j0..=j1 {
                    let end = if j == 0 || j == n_phi - 1 { 0.5 } else { 1.0 };
                    v += phi.values()[j] * (end * h_phi * g.amplitude(x - phi.x(j)));
                }
            }
            v
        })
        .collect();
    HybridDistribution::sampled(start, step, values)
}

/// Relative threshold below which ∫ρ counts as zero.
const RHO_THRESHOLD: f64 = 1e-24;

/// Reading distribution and its moments for a given Φ(f).
pub fn read_distribution(phi: &HybridDistribution, g: &ApparatusProfile) -> Result<ReadoutResult> {
    let psi = convolve_amplitude(phi, g)?;
    let rho = if g.is_ideal() && !phi.spikes().is_empty() {
        // Strong limit: non-overlapping peaks, weights |w_k|².
        let spikes = phi.spikes().iter().map(|s| Spike::new(s.location, C64::new(s.weight.norm_sqr(), 0.0))).collect();
        HybridDistribution::from_spikes(spikes)?
    } else {
        psi.map(|v| C64::new(v.norm_sqr(), 0.0))
    };
    let norm = rho.norm().re;
    let meter_norm = if g.is_ideal() { 1.0 } else { g.amplitude_norm_sq() };
    let threshold = RHO_THRESHOLD * meter_norm;
    if !(norm > threshold) {
        return Err(Error::DegenerateNormalization { norm, threshold });
    }
    let mean = rho.raw_integral(1).re / norm;
    let second_moment = rho.raw_integral(2).re / norm;
    Ok(ReadoutResult {
        psi_f: psi,
        rho_f: rho,
        mean,
        second_moment,
        transition_probability: norm / meter_norm,
        weak_reference: None,
    })
}

/// Reads the meter after the post-selected transition described by `spec`.
pub fn read_meter(sys: &FiniteSystem, spec: &TransitionSpec, g: &ApparatusProfile) -> Result<ReadoutResult> {
    let phi = amplitude_distribution(sys, spec, &FourierOptions::default())?;
    let mut out = read_distribution(&phi, g)?;
    out.weak_reference = match (weak_value(sys, spec, 1), weak_value(sys, spec, 2)) {
        (Ok(a), Ok(b)) => Some((a, b)),
        _ => None,
    };
    Ok(out)
}

/// ⟨f⟩ and ⟨f²⟩ from the λ-space forms with Ψ̃ = G̃Φ̃ (cross-check of the f-space route).
pub fn lambda_space_moments(sys: &FiniteSystem, spec: &TransitionSpec, g: &ApparatusProfile) -> Result<(f64, f64)> {
    if g.is_ideal() {
        return Err(Error::invalid("the λ-space route needs α > 0"));
    }
    let alpha = g.alpha();
    let k_max = match g.base() {
        crate::classical::BaseProfile::Gaussian => 14.0,
        crate::classical::BaseProfile::Sampled { z_step, .. } => std::f64::consts::PI / z_step,
    };
    let big = k_max / alpha;
    let evs = sys.eigenvalues();
    let span = evs[evs.len() - 1].abs().max(evs[0].abs()) + 1.0;
    let intervals = (((2.0 * big * span * 20.0).ceil() as usize).max(4096) + 1) & !1;
    let h = 2.0 * big / intervals as f64;
    let w = simpson_weights(intervals, h);
    let gt = |l: f64| alpha * g.base_fourier(alpha * l);
    let gstep = LAMBDA_STEP / alpha;
    let (mut num1, mut num2, mut den) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0);
    for (i, wi) in w.iter().enumerate() {
        let l = -big + i as f64 * h;
        let p = |x: f64| transition_amplitude(sys, spec, x).expect("validated spec");
        let p0 = p(l);
        let p1 = central_derivative(p, l, LAMBDA_STEP, 1);
        let p2 = central_derivative(p, l, LAMBDA_STEP_SECOND, 2);
        let gr = |x: f64| C64::new(gt(x), 0.0);
        let g0 = gt(l);
        let g1 = central_derivative(gr, l, gstep, 1).re;
        let g2 = central_derivative(gr, l, LAMBDA_STEP_SECOND / alpha, 2).re;
        num1 += wi * g0 * p0.conj() * (g1 * p0 + g0 * p1);
        num2 += wi * g0 * p0.conj() * (g2 * p0 + 2.0 * g1 * p1 + g0 * p2);
        den += wi * g0 * g0 * p0.norm_sqr();
    }
    if !(den > 0.0) {
        return Err(Error::DegenerateNormalization { norm: den, threshold: 0.0 });
    }
    Ok(((I * num1).re / den, -num2.re / den))
}

/// Closed-form ⟨f⟩ for the two-level example with a Gaussian meter.
pub fn two_level_closed_form(eps: f64, alpha: f64) -> f64 {
    let b = 1.0 - eps;
    let e = if alpha == 0.0 { 0.0 } else { (-1.0 / (2.0 * alpha * alpha)).exp() };
    (1.0 + 2.0 * b * b - 3.0 * b * e) / (1.0 + b * b - 2.0 * b * e)
}

/// Large-α prediction of the first two reading moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticMoments {
    pub weak_value: C64,
    pub weak_second: C64,
    pub c_factor: f64,
    /// Re f̄.
    pub mean: f64,
    /// α²⟨z²⟩ + C(Re f̄² − |f̄|²) + |f̄|².
    pub second_moment: f64,
}

pub fn asymptotic_moments(sys: &FiniteSystem, spec: &TransitionSpec, g: &ApparatusProfile) -> Result<AsymptoticMoments> {
    if !(g.alpha() >= 1.0) {
        return Err(Error::invalid("the large-α expansion needs α ≥ 1"));
    }
    let f1 = weak_value(sys, spec, 1)?;
    let f2 = weak_value(sys, spec, 2)?;
    let c = g.c_factor();
    Ok(asymptotic_from_weak_values(f1, f2, c, g))
}

pub fn asymptotic_from_weak_values(f1: C64, f2: C64, c: f64, g: &ApparatusProfile) -> AsymptoticMoments {
    let a2 = g.alpha() * g.alpha() * g.amplitude_z2();
    AsymptoticMoments {
        weak_value: f1,
        weak_second: f2,
        c_factor: c,
        mean: f1.re,
        second_moment: a2 + c * (f2.re - f1.norm_sqr()) + f1.norm_sqr(),
    }
}

/// One point of the ⟨f⟩(α, ε) surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub alpha: f64,
    pub epsilon: f64,
    pub mean_f: f64,
}

/// ⟨f⟩ of the two-level example over an (α, ε) grid, by direct quadrature.
pub fn two_level_surface(alphas: &[f64], epsilons: &[f64]) -> Result<Vec<SurfacePoint>> {
    let mut out = Vec::with_capacity(alphas.len() * epsilons.len());
    for &alpha in alphas {
        let g = if alpha == 0.0 { ApparatusProfile::ideal() } else { ApparatusProfile::gaussian(alpha)? };
        for &epsilon in epsilons {
            let (sys, spec) = crate::quantum::two_level_example(epsilon)?;
            let r = read_meter(&sys, &spec, &g)?;
            out.push(SurfacePoint { alpha, epsilon, mean_f: r.mean });
        }
    }
    Ok(out)
}

pub fn write_surface_csv<W: Write>(points: &[SurfacePoint], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Averages over an orthonormal set of final states when the final state is not controlled.
#[derive(Debug, Clone)]
pub struct FinalStateAverage {
    pub basis: Vec<CVector>,
    /// P_m = |⟨m|e^{−iHt}|Ψ₀⟩|².
    pub probabilities: Vec<f64>,
    /// ⟨Φ(f)⟩ = Σ_m P_m Φ_m(f) with Φ_m normalized to unit integral.
    pub averaged_distribution: HybridDistribution,
    pub w1: HybridDistribution,
    pub w2: HybridDistribution,
    /// ⟨f̄⟩ = Σ_m P_m f̄_m.
    pub mean: C64,
    /// ⟨f̄²⟩ = Σ_m P_m f̄²_m.
    pub second: C64,
    /// (f̄_m, f̄²_m) for the members with a non-degenerate transition amplitude.
    pub per_state: Vec<Option<(C64, C64)>>,
}

impl FinalStateAverage {
    /// ⟨⟨f⟩⟩ = Re⟨f̄⟩.
    pub fn predicted_mean(&self) -> f64 {
        self.mean.re
    }

    /// ⟨⟨f²⟩⟩ = α²⟨z²⟩ + Re⟨f̄²⟩.
    pub fn predicted_second_moment(&self, g: &ApparatusProfile) -> f64 {
        g.alpha() * g.alpha() * g.amplitude_z2() + self.second.re
    }
}

/// ‖B†B − 1‖_F for the basis vectors as columns.
pub fn gram_defect(basis: &[CVector]) -> f64 {
    let n = basis.len();
    let gram = CMatrix::from_fn(n, n, |r, c| basis[r].dotc(&basis[c]));
    (gram - CMatrix::identity(n, n)).norm()
}

fn check_basis(sys: &FiniteSystem, basis: &[CVector]) -> Result<()> {
    if basis.len() != sys.dim() || basis.iter().any(|b| b.len() != sys.dim()) {
        return Err(Error::invalid(format!("basis must contain {} vectors of dimension {}", sys.dim(), sys.dim())));
    }
    let defect = gram_defect(basis);
    if defect > 1e-10 {
        return Err(Error::invalid(format!("basis is not orthonormal: Gram defect {defect:e}")));
    }
    Ok(())
}

/// Standard basis of the system's Hilbert space.
pub fn standard_basis(dim: usize) -> Vec<CVector> {
    (0..dim)
        .map(|k| CVector::from_fn(dim, |i, _| if i == k { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }))
        .collect()
}

/// Σ_k c_k D_k for distributions sharing one smooth grid (or all spike-only).
fn linear_combination(parts: &[(C64, HybridDistribution)]) -> Result<HybridDistribution> {
    let smooth: Vec<&HybridDistribution> = parts.iter().map(|(_, d)| d).filter(|d| d.values().len() >= 2).collect();
    let mut spikes = Vec::new();
    for (c, d) in parts {
        spikes.extend(d.spikes().iter().map(|s| Spike::new(s.location, s.weight * c)));
    }
    let Some(first) = smooth.first() else {
        return HybridDistribution::from_spikes(spikes);
    };
    let mut values = vec![C64::new(0.0, 0.0); first.values().len()];
    for (c, d) in parts {
        if d.values().len() < 2 {
            continue;
        }
        if d.values().len() != values.len()
            || (d.grid_start() - first.grid_start()).abs() > 1e-12
            || (d.grid_step() - first.grid_step()).abs() > 1e-15
        {
            return Err(Error::invalid("distributions live on different grids"));
        }
        for (v, x) in values.iter_mut().zip(d.values()) {
            *v += x * c;
        }
    }
    HybridDistribution::new(first.grid_start(), first.grid_step(), values, spikes)
}

/// Averages Φ_m and the weak values over the basis, weighted with the unperturbed P_m.
/// The combination Σ conj(⟨m|U₀|Ψ₀⟩) Φ_m^bare avoids dividing by vanishing amplitudes.
pub fn average_over_final_states(
    sys: &FiniteSystem,
    spec: &TransitionSpec,
    basis: &[CVector],
    opts: &FourierOptions,
) -> Result<FinalStateAverage> {
    check_basis(sys, basis)?;
    let u0 = sys.propagator(spec.total_time);
    let amps: Vec<C64> = basis.iter().map(|m| braket(m, &u0, &spec.psi0)).collect();
    let probabilities: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    let bare_opts = FourierOptions { normalization: crate::quantum::AmplitudeNormalization::Bare, ..*opts };
    let mut parts = Vec::with_capacity(basis.len());
    let mut mean = C64::new(0.0, 0.0);
    let mut second = C64::new(0.0, 0.0);
    let mut per_state = Vec::with_capacity(basis.len());
    for (m, a) in basis.iter().zip(&amps) {
        let s = spec.with_post_selection(Some(m.clone()))?;
        parts.push((a.conj(), amplitude_distribution(sys, &s, &bare_opts)?));
        let c = lambda_taylor(sys, &s, m, 2);
        mean += a.conj() * I * c[1];
        second -= a.conj() * c[2] * 2.0;
        per_state.push(if a.norm() > AMPLITUDE_THRESHOLD {
            Some((I * c[1] / c[0], -c[2] * 2.0 / c[0]))
        } else {
            None
        });
    }
    let averaged = linear_combination(&parts)?;
    let (w1, w2) = averaged.decompose_complex()?;
    Ok(FinalStateAverage {
        basis: basis.to_vec(),
        probabilities,
        averaged_distribution: averaged,
        w1,
        w2,
        mean,
        second,
        per_state,
    })
}

/// I(λ) = Σ_m |⟨m|U_λ|Ψ₀⟩|², which equals 1 by unitarity.
pub fn sum_rule(sys: &FiniteSystem, spec: &TransitionSpec, basis: &[CVector], lambda: f64) -> f64 {
    let state = evolve_lambda(sys, spec, lambda) * &spec.psi0;
    basis.iter().map(|m| m.dotc(&state).norm_sqr()).sum()
}

/// Σ_m P_m ⟨f⟩_m and Σ_m P_m ⟨f²⟩_m from meter readings post-selected on each member.
///
/// P_m is the outcome probability with the meter in place, so the sum is the plain
/// average of all readings; weighting with the unperturbed |⟨m|U₀|Ψ₀⟩|² instead would
/// add an O(α⁻²) back-action bias.
pub fn direct_average_readings(
    sys: &FiniteSystem,
    spec: &TransitionSpec,
    basis: &[CVector],
    g: &ApparatusProfile,
) -> Result<(f64, f64)> {
    check_basis(sys, basis)?;
    let results: Vec<Result<(f64, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = basis
            .iter()
            .map(|m| {
                scope.spawn(move || -> Result<(f64, f64)> {
                    let s = spec.with_post_selection(Some(m.clone()))?;
                    match read_meter(sys, &s, g) {
                        Ok(r) => Ok((r.transition_probability * r.mean, r.transition_probability * r.second_moment)),
                        // an outcome that never occurs contributes nothing
                        Err(Error::DegenerateNormalization { .. }) => Ok((0.0, 0.0)),
                        Err(e) => Err(e),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("reader thread panicked")).collect()
    });
    let mut acc = (0.0, 0.0);
    for r in results {
        let (a, b) = r?;
        acc.0 += a;
        acc.1 += b;
    }
    Ok(acc)
}

/// ⟨f̄⟩ and ⟨f̄²⟩ from time integrals of the unperturbed evolution |Ψ(t′)⟩ = e^{−iHt′}|Ψ₀⟩.
///
/// The second moment is twice the time-ordered double integral of
/// β(t′)β(t″)⟨Ψ(t″)|A e^{−iH(t″−t′)} A|Ψ(t′)⟩ over t′ < t″.
pub fn time_integral_moments(sys: &FiniteSystem, spec: &TransitionSpec, nodes: usize) -> Result<(C64, C64)> {
    let a = sys.observable();
    let state = |s: f64| sys.propagator(s) * &spec.psi0;
    match spec.coupling {
        Coupling::Impulsive { t0 } => {
            let psi = state(t0);
            let a_psi = a * &psi;
            Ok((psi.dotc(&a_psi), a_psi.dotc(&a_psi)))
        }
        Coupling::Window => {
            let t = spec.total_time;
            let beta = 1.0 / t;
            let (xs, ws) = gauss_legendre(nodes, 0.0, t);
            let mut first = C64::new(0.0, 0.0);
            let mut second = C64::new(0.0, 0.0);
            for (&t2, &w2) in xs.iter().zip(&ws) {
                let psi2 = state(t2);
                let a_psi2 = a * &psi2;
                first += psi2.dotc(&a_psi2) * (beta * w2);
                let (ys, vs) = gauss_legendre(nodes, 0.0, t2);
                let mut inner = C64::new(0.0, 0.0);
                for (&t1, &w1) in ys.iter().zip(&vs) {
                    let v = a * (sys.propagator(t2 - t1) * (a * state(t1)));
                    inner += psi2.dotc(&v) * w1;
                }
                second += inner * (beta * beta * w2);
            }
            Ok((first, 2.0 * second))
        }
    }
}

/// ⟨f̄⟩ and ⟨f̄²⟩ from exact λ-derivatives of ⟨Ψ₀|U₀⁻¹U_λ|Ψ₀⟩.
pub fn lambda_route_moments(sys: &FiniteSystem, spec: &TransitionSpec) -> (C64, C64) {
    let target = sys.propagator(spec.total_time) * &spec.psi0;
    let c = lambda_taylor(sys, spec, &target, 2);
    (I * c[1], -2.0 * c[2])
}

/// S(λ) = ⟨Ψ₀|U₀⁻¹U_λ|Ψ₀⟩ or any other generating amplitude normalized to S(0) = 1.
pub trait PhaseSource {
    fn value(&self, lambda: f64) -> C64;
}

impl<F: Fn(f64) -> C64> PhaseSource for F {
    fn value(&self, lambda: f64) -> C64 {
        self(lambda)
    }
}

/// The no-post-selection generating amplitude of a finite system.
pub struct UnperturbedOverlap<'a> {
    sys: &'a FiniteSystem,
    spec: &'a TransitionSpec,
    target: CVector,
}

impl<'a> UnperturbedOverlap<'a> {
    pub fn new(sys: &'a FiniteSystem, spec: &'a TransitionSpec) -> Self {
        let target = sys.propagator(spec.total_time) * &spec.psi0;
        Self { sys, spec, target }
    }
}

impl PhaseSource for UnperturbedOverlap<'_> {
    fn value(&self, lambda: f64) -> C64 {
        braket(&self.target, &evolve_lambda(self.sys, self.spec, lambda), &self.spec.psi0)
    }
}

/// λ-grid used by the detector: `points` samples on [−half_width, half_width).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorGrid {
    pub half_width: f64,
    pub points: usize,
}

impl Default for DetectorGrid {
    fn default() -> Self {
        Self { half_width: 20.0, points: 2048 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharpness {
    /// Linear phase: ⟨Φ⟩ is a single spike.
    GenuinelySharp,
    /// Zero improper variance while ⟨Φ⟩ stays distributed.
    ImproperSharpness,
    NotZeroVariance,
    /// |S(λ)| ≠ 1 somewhere on the grid.
    PreconditionViolated,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroVarianceReport {
    pub classification: Sharpness,
    /// max ||S(λ)| − 1| on the grid.
    pub modulus_defect: f64,
    /// Re[iS′(0)/S(0)].
    pub mean: f64,
    /// Re[−S″(0)/S(0)].
    pub second_moment: f64,
    pub variance: f64,
    /// Largest deviation of the unwrapped phase from its linear fit.
    pub phase_nonlinearity: f64,
    /// f-grid points where the smeared |⟨Φ(f)⟩| exceeds 1% of its peak.
    pub support_points: usize,
    /// The same count for a single smeared spike.
    pub kernel_points: usize,
    pub support_width: f64,
}

const UNIT_MODULUS_TOL: f64 = 1e-8;
const LINEAR_PHASE_TOL: f64 = 1e-8;

/// Tests whether a vanishing improper variance Re⟨f̄²⟩ − ⟨f̄⟩² comes with a sharp value.
///
/// For |S| = 1 the variance vanishes identically; the distribution (2π)⁻¹∫S e^{iλf}dλ,
/// smeared with a Gaussian λ-window, tells a single spike (linear phase) from a spread.
pub fn zero_variance_detector(source: &dyn PhaseSource, grid: &DetectorGrid) -> Result<ZeroVarianceReport> {
    let n = grid.points;
    if n < 64 || !(grid.half_width > 0.0) {
        return Err(Error::invalid("detector grid needs ≥ 64 points and a positive width"));
    }
    let big = grid.half_width;
    let dl = 2.0 * big / n as f64;
    let lambdas: Vec<f64> = (0..n).map(|m| -big + m as f64 * dl).collect();
    let s: Vec<C64> = lambdas.iter().map(|&l| source.value(l)).collect();
    let s0 = source.value(0.0);
    let modulus_defect = s.iter().map(|v| (v.norm() - 1.0).abs()).fold((s0.norm() - 1.0).abs(), f64::max);

    let d1 = central_derivative(|l| source.value(l), 0.0, LAMBDA_STEP, 1);
    let d2 = central_derivative(|l| source.value(l), 0.0, LAMBDA_STEP_SECOND, 2);
    let mean = (I * d1 / s0).re;
    let second_moment = (-d2 / s0).re;
    let variance = second_moment - mean * mean;

    let mut phase: Vec<f64> = s.iter().map(|v| v.arg()).collect();
    unwrap_phase(&mut phase);
    let (slope, icpt) = linear_fit(&lambdas, &phase);
    let phase_nonlinearity =
        lambdas.iter().zip(&phase).map(|(l, p)| (p - slope * l - icpt).abs()).fold(0.0, f64::max);

    let sigma = big / 3.0;
    let windowed: Vec<C64> =
        s.iter().zip(&lambdas).map(|(v, l)| v * (-0.5 * (l / sigma).powi(2)).exp()).collect();
    let df = 2.0 * std::f64::consts::PI / (n as f64 * dl);
    let f0 = mean - (n / 2) as f64 * df;
    let smeared = fourier_synthesis(&windowed, -big, dl, f0, df);
    let peak = smeared.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let above: Vec<usize> = (0..n).filter(|&j| smeared[j].norm() > 0.01 * peak).collect();
    let support_points = above.len();
    let support_width = match (above.first(), above.last()) {
        (Some(a), Some(b)) => (b - a) as f64 * df,
        _ => 0.0,
    };
    let reach = (2.0 * 100f64.ln()).sqrt() / sigma;
    let kernel_points = 2 * (reach / df).floor() as usize + 1;

    let classification = if modulus_defect > UNIT_MODULUS_TOL {
        Sharpness::PreconditionViolated
    } else if variance.abs() > 1e-6 * mean.abs().max(1.0).powi(2) {
        Sharpness::NotZeroVariance
    } else if phase_nonlinearity < LINEAR_PHASE_TOL {
        Sharpness::GenuinelySharp
    } else {
        Sharpness::ImproperSharpness
    };
    Ok(ZeroVarianceReport {
        classification,
        modulus_defect,
        mean,
        second_moment,
        variance,
        phase_nonlinearity,
        support_points,
        kernel_points,
        support_width,
    })
}
