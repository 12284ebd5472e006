//! Time observables in one-dimensional and s-wave scattering (ħ = 1, unit mass): phase
//! time, the delay amplitude Φ_p(x), wavepacket centroids, the traversal-time weak value
//! and its amplitude distribution, and the finite-j Larmor clock.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dist::{HybridDistribution, Spike};
use crate::error::{Error, Result};
use crate::numerics::{fourier_synthesis, C64, I};
use crate::readout::PhaseSource;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScatterModel {
    /// V(x) = Ωδ(x).
    DeltaBarrier { omega: f64 },
    /// V(x) = Ω on [0, width].
    RectangularBarrier { omega: f64, width: f64 },
    /// The opaque-barrier form T(k) = exp[−(Ω − k²)a − ika], with the pre-exponential dropped.
    OpaqueApprox { omega: f64, width: f64 },
    /// V(r) = Ω for r < R, s-wave; `transmission` returns S = e^{2iδ₀}.
    RadialSquare { omega: f64, radius: f64 },
}

/// |T| below this leaves the phase undefined.
pub const PHASE_THRESHOLD: f64 = 1e-12;

/// sin(z)/z, with a series near zero.
fn sinc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

impl ScatterModel {
    pub fn validate(&self) -> Result<()> {
        let (omega, len) = match *self {
            ScatterModel::DeltaBarrier { omega } => (omega, 1.0),
            ScatterModel::RectangularBarrier { omega, width } | ScatterModel::OpaqueApprox { omega, width } => {
                (omega, width)
            }
            ScatterModel::RadialSquare { omega, radius } => (omega, radius),
        };
        if !omega.is_finite() {
            return Err(Error::invalid("Ω must be finite"));
        }
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::invalid("width/radius must be positive"));
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        match *self {
            ScatterModel::DeltaBarrier { omega }
            | ScatterModel::RectangularBarrier { omega, .. }
            | ScatterModel::OpaqueApprox { omega, .. }
            | ScatterModel::RadialSquare { omega, .. } => omega,
        }
    }

    /// Same geometry with a different strength Ω.
    pub fn with_omega(&self, omega: f64) -> Self {
        let mut m = *self;
        match &mut m {
            ScatterModel::DeltaBarrier { omega: o }
            | ScatterModel::RectangularBarrier { omega: o, .. }
            | ScatterModel::OpaqueApprox { omega: o, .. }
            | ScatterModel::RadialSquare { omega: o, .. } => *o = omega,
        }
        m
    }

    /// T(k) continued to all real k ≠ 0 (T(−k) = T(k)* for the barriers).
    fn amplitude(&self, k: f64) -> C64 {
        match *self {
            ScatterModel::DeltaBarrier { omega } => C64::new(k, 0.0) / C64::new(k, omega),
            ScatterModel::RectangularBarrier { omega, width: a } => {
                let q = C64::new(k * k - 2.0 * omega, 0.0).sqrt();
                let s = sinc(q * a) * a;
                let denom = 2.0 * k * (q * a).cos() - I * (k * k + q * q) * s;
                2.0 * k * C64::from_polar(1.0, -k * a) / denom
            }
            ScatterModel::OpaqueApprox { omega, width: a } => C64::new(-(omega - k * k) * a, -k * a).exp(),
            ScatterModel::RadialSquare { omega, radius } => s_matrix(k, omega, radius),
        }
    }

    /// ln T(k) − ln T(k′), continuous in its arguments when they are close.
    fn log_ratio(&self, k1: f64, k2: f64) -> C64 {
        match *self {
            ScatterModel::OpaqueApprox { omega, width: a } => {
                let l = |k: f64| C64::new(-(omega - k * k) * a, -k * a);
                l(k1) - l(k2)
            }
            _ => (self.amplitude(k1) / self.amplitude(k2)).ln(),
        }
    }
}

/// S = e^{2iδ₀} for the s-wave square potential, written with entire functions of κ² so
/// that k² < 2Ω needs no special casing.
pub fn s_matrix(k: f64, omega: f64, radius: f64) -> C64 {
    let kappa = C64::new(k * k - 2.0 * omega, 0.0).sqrt();
    let c = (kappa * radius).cos();
    let s = sinc(kappa * radius) * radius;
    C64::from_polar(1.0, -2.0 * k * radius) * (c + I * k * s) / (c - I * k * s)
}

/// T(k), or S(k) for the radial model.
pub fn transmission(model: &ScatterModel, k: f64) -> Result<C64> {
    model.validate()?;
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("k must be positive, got {k}")));
    }
    Ok(model.amplitude(k))
}

/// τ_phase = (1/p) dφ/dp by a central difference of arg T with one Richardson step.
pub fn phase_time(model: &ScatterModel, p: f64) -> Result<f64> {
    let t = transmission(model, p)?;
    let log_mag = match *model {
        ScatterModel::OpaqueApprox { omega, width } => -(omega - p * p) * width,
        _ => t.norm().ln(),
    };
    if !(log_mag > PHASE_THRESHOLD.ln()) {
        return Err(Error::precondition(format!("|T(p)| = {:e} is below threshold; phase undefined", log_mag.exp())));
    }
    let h = 1e-3 * p;
    let d = |h: f64| model.log_ratio(p + h, p - h).im / (2.0 * h);
    Ok((4.0 * d(0.5 * h) - d(h)) / 3.0 / p)
}

/// The opaque-barrier estimate next to the exact rectangular result, for the same (Ω, a).
pub fn phase_time_comparison(omega: f64, width: f64, p: f64) -> Result<(f64, f64)> {
    let exact = phase_time(&ScatterModel::RectangularBarrier { omega, width }, p)?;
    let approx = phase_time(&ScatterModel::OpaqueApprox { omega, width }, p)?;
    Ok((exact, approx))
}

/// Uniform x-grid of the delay amplitude; its length is also the Fourier period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayGrid {
    pub x_min: f64,
    pub dx: f64,
    pub points: usize,
}

impl DelayGrid {
    /// Covers the decay of Φ_p for x < 0 with a margin on the causal side.
    pub fn for_model(model: &ScatterModel, p: f64) -> Self {
        let rate = match *model {
            ScatterModel::DeltaBarrier { omega } => omega.abs(),
            ScatterModel::RectangularBarrier { omega, width } => {
                (2.0 * omega.abs()).sqrt().max(1.0 / width).min(omega.abs() * width)
            }
            _ => p,
        }
        .max(0.05 * p)
        .max(0.02)
        // the analytic tail terms decay only at the pole rate
        .min(tail_pole(p));
        let length = 50.0 / rate;
        let dx = (2e-3f64).min(0.02 / p.max(1.0));
        let points = ((1.25 * length / dx).ceil() as usize).next_power_of_two().min(1 << 20);
        let dx = 1.25 * length / points as f64;
        // x = 0 must be a node: the tail transforms jump there.
        let below = (0.8 * points as f64).round();
        Self { x_min: -below * dx, dx, points }
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }
}

/// Distance of the tail-term pole below the real axis.
fn tail_pole(p: f64) -> f64 {
    p.max(1.0)
}

/// Tolerance on the part of the k-integral lost to the window.
pub const WINDOW_TOLERANCE: f64 = 1e-6;

/// Large-k coefficients a₁, a₂ in T(k) = 1 + a₁/k + a₂/k² + O(k⁻³).
fn asymptotic_coefficients(model: &ScatterModel) -> Result<(C64, C64)> {
    match *model {
        ScatterModel::DeltaBarrier { omega } => Ok((C64::new(0.0, -omega), C64::new(-omega * omega, 0.0))),
        ScatterModel::RectangularBarrier { omega, width } => {
            let b = omega * width;
            Ok((C64::new(0.0, -b), C64::new(-0.5 * b * b, 0.0)))
        }
        _ => Err(Error::invalid("delay amplitude is defined for the delta and rectangular barriers")),
    }
}

/// Φ_p(x) = (2π)⁻¹ e^{−ipx} ∫T(k)e^{ikx}dk.
///
/// The forward spike δ(x) from T → 1 is stored analytically, as are the transforms of the
/// next two large-k terms, written as c₁/(u+iγ) + c₂/(u+iγ)² with u = k − p so that they
/// are causal. Only the O(u⁻³) remainder goes through the FFT, with a cosine taper on the
/// outer tenth of the window.
pub fn delay_amplitude(model: &ScatterModel, p: f64, grid: &DelayGrid) -> Result<HybridDistribution> {
    model.validate()?;
    if !(p > 0.0) {
        return Err(Error::invalid("p must be positive"));
    }
    let (a1, a2) = asymptotic_coefficients(model)?;
    let n = grid.points;
    if n < 64 || !(grid.dx > 0.0) {
        return Err(Error::invalid("delay grid needs ≥ 64 points and a positive step"));
    }
    let offset = -grid.x_min / grid.dx;
    if (offset - offset.round()).abs() > 1e-9 || offset < 0.0 || offset.round() as usize >= n {
        return Err(Error::invalid("the delay grid must contain x = 0 as a node"));
    }
    let gamma = tail_pole(p);
    let c1 = a1;
    let c2 = a2 - a1 * C64::new(p, -gamma);
    let big_u = PI / grid.dx;
    let du = 2.0 * big_u / n as f64;
    let taper_start = 0.9 * big_u;
    let mut lost = 0.0;
    let mut peak_r = 0.0f64;
    let remainder: Vec<C64> = (0..n)
        .map(|m| {
            let u = -big_u + m as f64 * du;
            let z = C64::new(u, gamma);
            let r = model.amplitude(p + u) - 1.0 - c1 / z - c2 / (z * z);
            peak_r = peak_r.max(r.norm());
            let w = if u.abs() > taper_start {
                0.5 * (1.0 + (PI * (u.abs() - taper_start) / (big_u - taper_start)).cos())
            } else {
                1.0
            };
            lost += r.norm() * (1.0 - w) * du;
            r * w
        })
        .collect();
    // Beyond the window r ~ u⁻³, so ∫_U^∞|r| ≈ |r(U)|·U/2 on each side.
    let edge = (model.amplitude(p + big_u) - 1.0 - c1 / C64::new(big_u, gamma) - c2 / C64::new(big_u, gamma).powi(2))
        .norm();
    lost += edge * big_u;
    let residual = lost / (2.0 * PI);
    let scale = a1.norm().max(1e-300);
    if residual > WINDOW_TOLERANCE * scale.max(1.0) {
        return Err(Error::precondition(format!(
            "k-window too narrow: windowing residual {residual:e} exceeds {WINDOW_TOLERANCE:e}; reduce dx"
        )));
    }
    let smooth = fourier_synthesis(&remainder, -big_u, du, grid.x_min, grid.dx);
    let values: Vec<C64> = smooth
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let x = grid.x(j);
            let tail = if x < -0.5 * grid.dx {
                let e = (gamma * x).exp();
                -I * c1 * e + c2 * x * e
            } else if x.abs() <= 0.5 * grid.dx {
                // Principal value of the jump, with the Euler-Maclaurin endpoint term folded in
                // so that the trapezoid sum of the tails matches their exact integral.
                -0.5 * I * c1 - grid.dx / 12.0 * (c2 - I * c1 * gamma)
            } else {
                C64::new(0.0, 0.0)
            };
            v * du / (2.0 * PI) + tail
        })
        .collect();
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    // The tail oscillates, so one end node can sit near a zero; take the whole outer stretch.
    // Whatever is left there wraps around onto x > 0.
    let edge_value = values[..n / 32].iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak > 0.0 && edge_value > EDGE_TOLERANCE * peak {
        return Err(Error::precondition(format!(
            "x-grid too short: |Φ_p| near the edge is {:.1e} of its peak",
            edge_value / peak
        )));
    }
    HybridDistribution::new(grid.x_min, grid.dx, values, vec![Spike::new(0.0, C64::new(1.0, 0.0))])
}

/// Largest |Φ_p| allowed on the outer stretch of the x-grid, relative to the peak.
pub const EDGE_TOLERANCE: f64 = 1e-7;

/// Starts from [`DelayGrid::for_model`] and refines until both grid checks pass: a longer
/// grid when the tail has not died out at the edge (narrow above-barrier resonances decay
/// slowly), a finer step when the k-window loses too much of a strong barrier's transform.
pub fn delay_amplitude_auto(model: &ScatterModel, p: f64) -> Result<(DelayGrid, HybridDistribution)> {
    let mut grid = DelayGrid::for_model(model, p);
    loop {
        match delay_amplitude(model, p, &grid) {
            Err(Error::Precondition(msg)) if grid.points < 1 << 23 => {
                grid = if msg.starts_with("x-grid too short") {
                    DelayGrid { x_min: 2.0 * grid.x_min, dx: grid.dx, points: 2 * grid.points }
                } else if msg.starts_with("k-window too narrow") {
                    DelayGrid { x_min: grid.x_min, dx: 0.5 * grid.dx, points: 2 * grid.points }
                } else {
                    return Err(Error::Precondition(msg));
                };
            }
            other => return other.map(|d| (grid, d)),
        }
    }
}

/// Gaussian momentum envelope A(k) ∝ exp[−(k − p)²/(4σ_k²)], so |A|² has width σ_k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub sigma_k: f64,
}

impl Envelope {
    /// Initial coordinate width 1/(2σ_k).
    pub fn sigma_x(&self) -> f64 {
        0.5 / self.sigma_k
    }

    /// Earliest time at which the freely moving packet sits 6.5 widths beyond x = `edge`.
    pub fn clearing_time(&self, p: f64, edge: f64) -> f64 {
        let mut t = (edge.max(0.0) + 6.5 * self.sigma_x()) / p;
        for _ in 0..50 {
            let width = (self.sigma_x().powi(2) + (self.sigma_k * t).powi(2)).sqrt();
            t = (edge.max(0.0) + 6.5 * width) / p;
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WavepacketDelay {
    /// p⁻¹⟨pt − x⟩ of the transmitted packet.
    pub delay: f64,
    /// P^T = ∫|T|²|A|²dk.
    pub transmission_probability: f64,
    pub time: f64,
    /// Norm fraction left at x < edge of the scatterer.
    pub uncleared_fraction: f64,
}

/// Largest allowed norm fraction of Ψ^T inside or before the barrier region.
pub const CLEARING_TOLERANCE: f64 = 1e-6;

/// Centroid delay of the transmitted packet Ψ^T(x,t) = ∫T(k)A(k)e^{ikx − ik²t/2}dk.
pub fn wavepacket_delay(model: &ScatterModel, envelope: &Envelope, p: f64, time: Option<f64>) -> Result<WavepacketDelay> {
    model.validate()?;
    if matches!(model, ScatterModel::RadialSquare { .. } | ScatterModel::OpaqueApprox { .. }) {
        return Err(Error::invalid("wavepacket delay needs a one-dimensional barrier model"));
    }
    let sk = envelope.sigma_k;
    if !(p > 0.0) || !(sk > 0.0) || sk > 0.25 * p {
        return Err(Error::invalid("need p > 0 and 0 < σ_k ≤ p/4"));
    }
    let edge = match *model {
        ScatterModel::RectangularBarrier { width, .. } => width,
        _ => 0.0,
    };
    let t = time.unwrap_or_else(|| envelope.clearing_time(p, edge));
    let n = 4096;
    let k_half = 40.0 * sk;
    let dk = 2.0 * k_half / n as f64;
    let dx = 2.0 * PI / (n as f64 * dk);
    let x0 = p * t - (n / 2) as f64 * dx;
    let norm_a = (2.0 * PI * sk * sk).powf(-0.25);
    let mut pt_sum = 0.0;
    let amp: Vec<C64> = (0..n)
        .map(|m| {
            let k = p - k_half + m as f64 * dk;
            let a = norm_a * (-(k - p).powi(2) / (4.0 * sk * sk)).exp();
            let tk = if k > 0.0 { model.amplitude(k) } else { C64::new(0.0, 0.0) };
            pt_sum += (tk.norm_sqr() * a * a) * dk;
            tk * a * C64::from_polar(1.0, -0.5 * k * k * t)
        })
        .collect();
    let psi = fourier_synthesis(&amp, p - k_half, dk, x0, dx);
    let dens: Vec<f64> = psi.iter().map(|v| v.norm_sqr()).collect();
    let total: f64 = dens.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateNormalization { norm: total, threshold: 0.0 });
    }
    let uncleared: f64 = dens.iter().enumerate().filter(|(j, _)| x0 + *j as f64 * dx < edge).map(|(_, d)| d).sum::<f64>() / total;
    if uncleared > CLEARING_TOLERANCE {
        return Err(Error::precondition(format!(
            "packet has not cleared the barrier: norm fraction {uncleared:e} at x < {edge}"
        )));
    }
    let mean_x: f64 = dens.iter().enumerate().map(|(j, d)| (x0 + j as f64 * dx) * d).sum::<f64>() / total;
    Ok(WavepacketDelay {
        delay: (p * t - mean_x) / p,
        transmission_probability: pt_sum,
        time: t,
        uncleared_fraction: uncleared,
    })
}

fn radial_params(model: &ScatterModel) -> Result<(f64, f64)> {
    match *model {
        ScatterModel::RadialSquare { omega, radius } => {
            model.validate()?;
            Ok((omega, radius))
        }
        _ => Err(Error::invalid("traversal quantities need the radial square model")),
    }
}

/// S(k, Ω + λ)/S(k, Ω): the generating amplitude of the traversal time inside r < R.
#[derive(Debug, Clone, Copy)]
pub struct TraversalSource {
    pub k: f64,
    pub omega: f64,
    pub radius: f64,
    s0: C64,
}

impl TraversalSource {
    pub fn new(model: &ScatterModel, k: f64) -> Result<Self> {
        let (omega, radius) = radial_params(model)?;
        if !(k > 0.0) {
            return Err(Error::invalid("k must be positive"));
        }
        Ok(Self { k, omega, radius, s0: s_matrix(k, omega, radius) })
    }
}

impl PhaseSource for TraversalSource {
    fn value(&self, lambda: f64) -> C64 {
        s_matrix(self.k, self.omega + lambda, self.radius) / self.s0
    }
}

/// λ-steps for the traversal weak values.
pub const TRAVERSAL_STEP_FIRST: f64 = 1e-6;
pub const TRAVERSAL_STEP_SECOND: f64 = 1e-3;

/// τ̄ = i∂_λ ln S(Ω+λ) (order 1) or τ̄² = −S⁻¹∂²_λS (order 2), at λ = 0.
pub fn traversal_weak_value(model: &ScatterModel, k: f64, order: u32) -> Result<C64> {
    let src = TraversalSource::new(model, k)?;
    match order {
        1 => {
            let h = TRAVERSAL_STEP_FIRST;
            // Log of the ratio keeps the branch continuous.
            let d = |h: f64| I * (src.value(h) / src.value(-h)).ln() / (2.0 * h);
            Ok((4.0 * d(0.5 * h) - d(h)) / 3.0)
        }
        2 => {
            let h = TRAVERSAL_STEP_SECOND;
            let d = |h: f64| -(src.value(h) - 2.0 + src.value(-h)) / (h * h);
            Ok((4.0 * d(0.5 * h) - d(h)) / 3.0)
        }
        _ => Err(Error::invalid("traversal weak values are available for orders 1 and 2")),
    }
}

/// (2/k)(R − sin(2kR)/(2k)): τ̄ of the free particle.
pub fn free_traversal_time(k: f64, radius: f64) -> f64 {
    (2.0 / k) * (radius - (2.0 * k * radius).sin() / (2.0 * k))
}

/// Uniform τ-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub start: f64,
    pub step: f64,
    pub points: usize,
}

/// Smeared Φ(τ) = (2π)⁻¹∫S̃(λ)e^{−σ²λ²/2}e^{iλτ}dλ for any generating amplitude S̃ with S̃(0) = 1.
pub fn amplitude_from_source(source: &dyn PhaseSource, grid: &TauGrid, smear: f64) -> Result<HybridDistribution> {
    let n = grid.points;
    if n < 64 || !(grid.step > 0.0) || !(smear > 0.0) {
        return Err(Error::invalid("τ-grid needs ≥ 64 points, a positive step and a positive smearing width"));
    }
    let big = PI / grid.step;
    if big * smear < 6.0 {
        return Err(Error::precondition(format!(
            "Nyquist violation: λ-range π/Δτ = {big:.3} gives Λσ = {:.2} < 6; refine the τ-grid",
            big * smear
        )));
    }
    let dl = 2.0 * big / n as f64;
    let amp: Vec<C64> = (0..n)
        .map(|m| {
            let l = -big + m as f64 * dl;
            source.value(l) * (-0.5 * (smear * l).powi(2)).exp()
        })
        .collect();
    let values: Vec<C64> =
        fourier_synthesis(&amp, -big, dl, grid.start, grid.step).into_iter().map(|v| v * dl / (2.0 * PI)).collect();
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let edge = values[0].norm().max(values[n - 1].norm());
    if edge > 1e-6 * peak {
        return Err(Error::precondition(format!(
            "τ-grid too short: |Φ| at the edge is {:.1e} of its peak",
            edge / peak
        )));
    }
    HybridDistribution::sampled(grid.start, grid.step, values)
}

/// Default smearing width 0.03R².
pub fn default_smear(radius: f64) -> f64 {
    0.03 * radius * radius
}

/// Traversal-time amplitude distribution inside r < R, smeared with a Gaussian of width `smear`.
pub fn traversal_amplitude(model: &ScatterModel, k: f64, grid: &TauGrid, smear: f64) -> Result<HybridDistribution> {
    let src = TraversalSource::new(model, k)?;
    amplitude_from_source(&src, grid, smear)
}

/// Large spin initially polarised along x, precessing at ω inside the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinClock {
    pub j: f64,
    pub omega: f64,
}

impl SpinClock {
    pub fn new(j: f64, omega: f64) -> Result<Self> {
        if !(j >= 1.0) || (2.0 * j).fract() != 0.0 {
            return Err(Error::invalid("j must be an integer or half-integer ≥ 1"));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::invalid("Larmor frequency must be positive"));
        }
        Ok(Self { j, omega })
    }

    /// Retained m-range: |m| ≤ min(j, 12√j); beyond it e^{−m²/2j} < e^{−72}.
    fn m_values(&self) -> Vec<f64> {
        let cut = self.j.min(12.0 * self.j.sqrt());
        let count = (2.0 * self.j) as usize + 1;
        (0..count).map(|i| -self.j + i as f64).filter(|m| m.abs() <= cut).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClockReading {
    /// (ωj)⁻¹⟨J_y⟩.
    pub t_bar: f64,
    /// (ωj)⁻²[⟨J_y²⟩ − j/2].
    pub t2_bar: f64,
    /// ‖M_F‖ after normalizing M_I.
    pub final_norm: f64,
}

/// Larmor clock for an arbitrary generating amplitude: ⟨m|M_F⟩ = S̃(mω)⟨m|M_I⟩.
pub fn larmor_clock_with(source: &dyn PhaseSource, clock: &SpinClock) -> Result<ClockReading> {
    let ms = clock.m_values();
    let j = clock.j;
    let init: Vec<f64> = ms.iter().map(|m| (-m * m / (2.0 * j)).exp()).collect();
    let c = init.iter().map(|a| a * a).sum::<f64>().sqrt();
    let amps: Vec<C64> = ms.iter().zip(&init).map(|(m, a)| source.value(m * clock.omega) * (a / c)).collect();
    let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if !(norm_sq > 1e-300) || !norm_sq.is_finite() {
        return Err(Error::DegenerateNormalization { norm: norm_sq, threshold: 1e-300 });
    }
    // ⟨m+1|J_y|m⟩ = −i√((j−m)(j+m+1))/2 and its adjoint.
    let mut jy = vec![C64::new(0.0, 0.0); amps.len()];
    for i in 0..amps.len().saturating_sub(1) {
        let m = ms[i];
        let c = ((j - m) * (j + m + 1.0)).sqrt() / 2.0;
        jy[i + 1] += -I * c * amps[i];
        jy[i] += I * c * amps[i + 1];
    }
    let mean: f64 = amps.iter().zip(&jy).map(|(a, b)| (a.conj() * b).re).sum::<f64>() / norm_sq;
    let square: f64 = jy.iter().map(|v| v.norm_sqr()).sum::<f64>() / norm_sq;
    let wj = clock.omega * j;
    Ok(ClockReading { t_bar: mean / wj, t2_bar: (square - j / 2.0) / (wj * wj), final_norm: norm_sq.sqrt() })
}

pub fn larmor_clock(model: &ScatterModel, k: f64, clock: &SpinClock) -> Result<ClockReading> {
    larmor_clock_with(&TraversalSource::new(model, k)?, clock)
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// Rows `omega,tau_bar` of Re τ̄ against Ω.
pub fn write_traversal_sweep_csv<W: Write>(radius: f64, k: f64, omegas: &[f64], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["omega", "tau_bar"])?;
    for &omega in omegas {
        let t = traversal_weak_value(&ScatterModel::RadialSquare { omega, radius }, k, 1)?;
        w.write_record([omega.to_string(), t.re.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `omega_over_p,tau_phase` for the delta barrier.
pub fn write_phase_time_sweep_csv<W: Write>(p: f64, ratios: &[f64], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["omega_over_p", "tau_phase"])?;
    for &r in ratios {
        let t = phase_time(&ScatterModel::DeltaBarrier { omega: r * p }, p)?;
        w.write_record([r.to_string(), t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
