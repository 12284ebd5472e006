//! Finite-dimensional systems coupled to a von Neumann-like meter: the λ-dependent
//! evolution operator, the amplitude distribution Φ(f) over virtual paths and weak values.

use serde::{Deserialize, Serialize};

use crate::dist::{HybridDistribution, Spike};
use crate::error::{Error, Result};
use crate::linalg::{braket, exp_taylor_coefficients, expm_hermitian, hermiticity_defect, CMatrix, CVector, HermitianEigen};
use crate::numerics::{central_derivative, fourier_synthesis, C64, I};

/// Maximum number of enumerated virtual paths.
pub const PATH_CAP: usize = 10_000;

/// Hamiltonian H and measured observable A on a finite Hilbert space.
#[derive(Debug, Clone)]
pub struct FiniteSystem {
    hamiltonian: CMatrix,
    observable: CMatrix,
    h_eigen: HermitianEigen,
    spectrum: Vec<(f64, CMatrix)>,
}

impl FiniteSystem {
    pub fn new(hamiltonian: CMatrix, observable: CMatrix) -> Result<Self> {
        let n = hamiltonian.nrows();
        if n < 2 || hamiltonian.ncols() != n || observable.nrows() != n || observable.ncols() != n {
            return Err(Error::invalid("H and A must be square matrices of equal dimension >= 2"));
        }
        for (name, m) in [("H", &hamiltonian), ("A", &observable)] {
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::invalid(format!("{name} has non-finite entries")));
            }
            let defect = hermiticity_defect(m);
            if defect > 1e-12 * m.norm().max(1.0) {
                return Err(Error::invalid(format!("{name} is not Hermitian: ‖M − M†‖ = {defect:e}")));
            }
        }
        let a_eigen = HermitianEigen::new(&observable);
        let rebuilt = a_eigen.apply(|x| C64::new(x, 0.0));
        if (&rebuilt - &observable).norm() > 1e-10 * observable.norm().max(1.0) {
            return Err(Error::precondition("eigen-decomposition of A does not reproduce A"));
        }
        let tol = 1e-10 * a_eigen.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let spectrum = a_eigen.spectral_projectors(tol);
        let h_eigen = HermitianEigen::new(&hamiltonian);
        Ok(Self { hamiltonian, observable, h_eigen, spectrum })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn observable(&self) -> &CMatrix {
        &self.observable
    }

    /// Distinct eigenvalues of A with their spectral projectors, ascending.
    pub fn spectrum(&self) -> &[(f64, CMatrix)] {
        &self.spectrum
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum.iter().map(|(a, _)| *a).collect()
    }

    /// True when H vanishes (all virtual paths are constant).
    pub fn is_static(&self) -> bool {
        self.hamiltonian.norm() <= 1e-14
    }

    /// e^{−iHt}.
    pub fn propagator(&self, t: f64) -> CMatrix {
        self.h_eigen.apply(|e| (-I * e * t).exp())
    }
}

/// How the meter is switched on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coupling {
    /// β(t′) = δ(t′ − t0).
    Impulsive { t0: f64 },
    /// β = 1/t on [0, t].
    Window,
}

/// Prepared state, optional post-selected state, duration and coupling.
#[derive(Debug, Clone)]
pub struct TransitionSpec {
    pub psi0: CVector,
    pub psi1: Option<CVector>,
    pub total_time: f64,
    pub coupling: Coupling,
}

fn check_normalized(v: &CVector, name: &str) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("{name} must be normalized, ‖{name}‖ = {n}")));
    }
    Ok(())
}

impl TransitionSpec {
    pub fn new(psi0: CVector, psi1: Option<CVector>, total_time: f64, coupling: Coupling) -> Result<Self> {
        check_normalized(&psi0, "psi0")?;
        if let Some(p) = &psi1 {
            check_normalized(p, "psi1")?;
            if p.len() != psi0.len() {
                return Err(Error::invalid("psi0 and psi1 have different dimensions"));
            }
        }
        if !(total_time > 0.0) || !total_time.is_finite() {
            return Err(Error::invalid("total time must be positive"));
        }
        if let Coupling::Impulsive { t0 } = coupling {
            if !(0.0..=total_time).contains(&t0) {
                return Err(Error::invalid(format!("t0 = {t0} lies outside [0, {total_time}]")));
            }
        }
        Ok(Self { psi0, psi1, total_time, coupling })
    }

    /// Normalizes the supplied vectors before validating.
    pub fn normalized(psi0: CVector, psi1: Option<CVector>, total_time: f64, coupling: Coupling) -> Result<Self> {
        let unit = |v: CVector| -> Result<CVector> {
            let n = v.norm();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::invalid("state vector has zero or non-finite norm"));
            }
            Ok(v.unscale(n))
        };
        Self::new(unit(psi0)?, psi1.map(unit).transpose()?, total_time, coupling)
    }

    /// Same preparation and coupling, different (or no) post-selection.
    pub fn with_post_selection(&self, psi1: Option<CVector>) -> Result<Self> {
        Self::new(self.psi0.clone(), psi1, self.total_time, self.coupling)
    }

    fn post_selected(&self) -> Result<&CVector> {
        self.psi1.as_ref().ok_or_else(|| {
            Error::invalid("no post-selected state: use the final-state averaging routines instead")
        })
    }
}

fn check_dims(sys: &FiniteSystem, spec: &TransitionSpec) -> Result<()> {
    if spec.psi0.len() != sys.dim() {
        return Err(Error::invalid("state dimension does not match the system"));
    }
    Ok(())
}

/// U_λ: impulsive e^{−iH(t−t0)} e^{−iλA} e^{−iHt0}; window e^{−i(Ht + λA)}.
pub fn evolve_lambda(sys: &FiniteSystem, spec: &TransitionSpec, lambda: f64) -> CMatrix {
    let t = spec.total_time;
    match spec.coupling {
        Coupling::Impulsive { t0 } => {
            let kick = expm_hermitian(sys.observable(), lambda);
            sys.propagator(t - t0) * kick * sys.propagator(t0)
        }
        Coupling::Window => {
            let gen = sys.hamiltonian() * C64::new(t, 0.0) + sys.observable() * C64::new(lambda, 0.0);
            expm_hermitian(&gen, 1.0)
        }
    }
}

/// Φ̃(λ) = ⟨Ψ₁|U_λ|Ψ₀⟩.
pub fn transition_amplitude(sys: &FiniteSystem, spec: &TransitionSpec, lambda: f64) -> Result<C64> {
    check_dims(sys, spec)?;
    let psi1 = spec.post_selected()?;
    Ok(braket(psi1, &evolve_lambda(sys, spec, lambda), &spec.psi0))
}

/// Taylor coefficients c_k = ∂^k_λ Φ̃(0)/k!, k = 0..=order, evaluated exactly.
pub fn lambda_taylor(sys: &FiniteSystem, spec: &TransitionSpec, psi1: &CVector, order: usize) -> Vec<C64> {
    let t = spec.total_time;
    match spec.coupling {
        Coupling::Impulsive { t0 } => {
            let left = psi1.adjoint() * sys.propagator(t - t0);
            let mut right = sys.propagator(t0) * &spec.psi0;
            let mut fact = 1.0;
            let mut out = Vec::with_capacity(order + 1);
            for k in 0..=order {
                if k > 0 {
                    fact *= k as f64;
                    right = sys.observable() * right * (-I);
                }
                out.push((&left * &right)[(0, 0)] / fact);
            }
            out
        }
        Coupling::Window => {
            let x = sys.hamiltonian() * (-I * t);
            let e = sys.observable() * (-I);
            exp_taylor_coefficients(&x, &e, order)
                .iter()
                .map(|m| braket(psi1, m, &spec.psi0))
                .collect()
        }
    }
}

/// Degeneracy threshold on |⟨Ψ₁|e^{−iHt}|Ψ₀⟩|; amplitudes are bounded by 1.
pub const AMPLITUDE_THRESHOLD: f64 = 1e-12;

/// Weak value f̄ⁿ = iⁿ ∂ⁿ_λ Φ̃(0)/Φ̃(0).
pub fn weak_value(sys: &FiniteSystem, spec: &TransitionSpec, order: usize) -> Result<C64> {
    check_dims(sys, spec)?;
    let psi1 = spec.post_selected()?;
    let c = lambda_taylor(sys, spec, psi1, order);
    if !(c[0].norm() > AMPLITUDE_THRESHOLD) {
        return Err(Error::DegenerateNormalization { norm: c[0].norm(), threshold: AMPLITUDE_THRESHOLD });
    }
    let fact: f64 = (1..=order).map(|k| k as f64).product();
    Ok(I.powi(order as i32) * c[order] * fact / c[0])
}

/// Weak value by central finite differences of Φ̃(λ) (orders 1 and 2).
pub fn weak_value_fd(sys: &FiniteSystem, spec: &TransitionSpec, order: u32, step: f64) -> Result<C64> {
    let phi0 = transition_amplitude(sys, spec, 0.0)?;
    if !(phi0.norm() > AMPLITUDE_THRESHOLD) {
        return Err(Error::DegenerateNormalization { norm: phi0.norm(), threshold: AMPLITUDE_THRESHOLD });
    }
    let psi1 = spec.post_selected()?.clone();
    let f = |l: f64| braket(&psi1, &evolve_lambda(sys, spec, l), &spec.psi0);
    Ok(I.powi(order as i32) * central_derivative(f, 0.0, step, order) / phi0)
}

/// Weight convention for Φ(f).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeNormalization {
    /// ∫Φ df = ⟨Ψ₁|e^{−iHt}|Ψ₀⟩.
    #[default]
    Bare,
    /// ∫Φ df = 1.
    Normalized,
}

/// Discretization of the Window-coupling Fourier route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierOptions {
    /// Number of λ (and f) points.
    pub points: usize,
    /// f-range of the smooth part; default pads the eigenvalue range by a quarter span each side.
    pub f_range: Option<(f64, f64)>,
    pub normalization: AmplitudeNormalization,
}

impl Default for FourierOptions {
    fn default() -> Self {
        Self { points: 1 << 12, f_range: None, normalization: AmplitudeNormalization::Bare }
    }
}

/// Spike weights ⟨Ψ₁|P_k e^{−iP_k H P_k t} P_k|Ψ₀⟩: the paths that never leave eigenspace k.
fn window_spikes(sys: &FiniteSystem, spec: &TransitionSpec, psi1: &CVector) -> Vec<Spike> {
    sys.spectrum()
        .iter()
        .map(|(a, p)| {
            let hk = p * sys.hamiltonian() * p;
            let u = expm_hermitian(&hk, spec.total_time);
            Spike::new(*a, braket(psi1, &(p * u * p), &spec.psi0))
        })
        .collect()
}

/// Amplitude distribution Φ(f) of the meter reading for the post-selected transition.
///
/// Impulsive coupling gives a pure spike distribution on the eigenvalues of A. Window
/// coupling gives spikes for the constant paths plus a smooth part obtained by a discrete
/// Fourier transform of Φ̃(λ) minus the spike contribution.
pub fn amplitude_distribution(
    sys: &FiniteSystem,
    spec: &TransitionSpec,
    opts: &FourierOptions,
) -> Result<HybridDistribution> {
    check_dims(sys, spec)?;
    let psi1 = spec.post_selected()?;
    let dist = match spec.coupling {
        Coupling::Impulsive { t0 } => {
            let left = psi1.adjoint() * sys.propagator(spec.total_time - t0);
            let right = sys.propagator(t0) * &spec.psi0;
            let spikes = sys
                .spectrum()
                .iter()
                .map(|(a, p)| Spike::new(*a, (&left * p * &right)[(0, 0)]))
                .collect();
            HybridDistribution::from_spikes(spikes)?
        }
        Coupling::Window => {
            let spikes = window_spikes(sys, spec, psi1);
            let n = opts.points;
            if n < 16 {
                return Err(Error::invalid("the Fourier route needs at least 16 points"));
            }
            let evs = sys.eigenvalues();
            let (amin, amax) = (evs[0], evs[evs.len() - 1]);
            let (f0, f1) = opts.f_range.unwrap_or_else(|| {
                let pad = 0.25 * (amax - amin).max(1.0);
                (amin - pad, amax + pad)
            });
            if !(f1 > f0) {
                return Err(Error::invalid("empty f-range"));
            }
            let df = (f1 - f0) / n as f64;
            let big_lambda = std::f64::consts::PI / df;
            let dl = 2.0 * big_lambda / n as f64;
            let remainder: Vec<C64> = (0..n)
                .map(|m| {
                    let l = -big_lambda + m as f64 * dl;
                    let full = braket(psi1, &evolve_lambda(sys, spec, l), &spec.psi0);
                    let asym: C64 = spikes.iter().map(|s| s.weight * C64::from_polar(1.0, -l * s.location)).sum();
                    full - asym
                })
                .collect();
            // Exponentiating Ht + λA loses ~ε(Λ‖A‖ + ‖H‖t) in phase; a remainder at that
            // level is rounding noise, not a smooth part.
            let a_norm = amin.abs().max(amax.abs());
            let floor = 64.0 * f64::EPSILON * (big_lambda * a_norm + sys.hamiltonian().norm() * spec.total_time);
            let peak = remainder.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if peak < floor.max(1e-13) {
                HybridDistribution::from_spikes(spikes)?
            } else {
                let scale = dl / (2.0 * std::f64::consts::PI);
                let values: Vec<C64> =
                    fourier_synthesis(&remainder, -big_lambda, dl, f0, df).into_iter().map(|v| v * scale).collect();
                HybridDistribution::new(f0, df, values, spikes)?
            }
        }
    };
    match opts.normalization {
        AmplitudeNormalization::Bare => Ok(dist),
        AmplitudeNormalization::Normalized => {
            let a0 = transition_amplitude(sys, spec, 0.0)?;
            if !(a0.norm() > AMPLITUDE_THRESHOLD) {
                return Err(Error::DegenerateNormalization { norm: a0.norm(), threshold: AMPLITUDE_THRESHOLD });
            }
            Ok(dist.scale(a0.inv()))
        }
    }
}

/// One enumerated virtual path of the sliced product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VirtualPath {
    /// Eigenvalue of A at each insertion time.
    pub values: Vec<f64>,
    /// Value of the coupling functional F[a] on this path.
    pub functional: f64,
    pub amplitude: C64,
}

/// Insertion times: `slices` uniform steps on [0, t], plus t0 for impulsive coupling.
fn slice_times(spec: &TransitionSpec, slices: usize) -> Vec<f64> {
    let t = spec.total_time;
    let mut times: Vec<f64> = (0..=slices).map(|j| t * j as f64 / slices as f64).collect();
    if let Coupling::Impulsive { t0 } = spec.coupling {
        if !times.iter().any(|&x| (x - t0).abs() <= 1e-12 * t) {
            times.push(t0);
            times.sort_by(f64::total_cmp);
        }
    }
    times
}

/// Enumerates the amplitudes ⟨Ψ₁|P_{k_N} U(Δt_N) … U(Δt_1) P_{k_0}|Ψ₀⟩ of every eigenvalue
/// sequence; they sum to ⟨Ψ₁|e^{−iHt}|Ψ₀⟩. For H = 0 only the constant paths are returned.
pub fn virtual_path_amplitudes(sys: &FiniteSystem, spec: &TransitionSpec, slices: usize) -> Result<Vec<VirtualPath>> {
    check_dims(sys, spec)?;
    let psi1 = spec.post_selected()?;
    let spectrum = sys.spectrum();
    if sys.is_static() {
        return Ok(spectrum
            .iter()
            .map(|(a, p)| VirtualPath { values: vec![*a; slices + 1], functional: *a, amplitude: braket(psi1, p, &spec.psi0) })
            .collect());
    }
    if slices < 1 {
        return Err(Error::invalid("need at least one time slice"));
    }
    let times = slice_times(spec, slices);
    let g = spectrum.len();
    let count = (g as f64).powi(times.len() as i32);
    if count > PATH_CAP as f64 {
        return Err(Error::precondition(format!(
            "{count:.0} paths exceed the cap of {PATH_CAP}; use amplitude_distribution (Fourier route)"
        )));
    }
    let t = spec.total_time;
    let weights: Vec<f64> = match spec.coupling {
        Coupling::Impulsive { t0 } => {
            times.iter().map(|&x| if (x - t0).abs() <= 1e-12 * t { 1.0 } else { 0.0 }).collect()
        }
        Coupling::Window => (0..times.len())
            .map(|j| {
                let left = if j > 0 { times[j] - times[j - 1] } else { 0.0 };
                let right = if j + 1 < times.len() { times[j + 1] - times[j] } else { 0.0 };
                0.5 * (left + right) / t
            })
            .collect(),
    };
    let steps: Vec<CMatrix> = times.windows(2).map(|w| sys.propagator(w[1] - w[0])).collect();
    let tail = sys.propagator(t - times[times.len() - 1]);
    let mut out = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; times.len()];
    loop {
        let mut state = &spectrum[idx[0]].1 * &spec.psi0;
        for (j, u) in steps.iter().enumerate() {
            state = &spectrum[idx[j + 1]].1 * (u * state);
        }
        let amplitude = psi1.dotc(&(&tail * state));
        let values: Vec<f64> = idx.iter().map(|&k| spectrum[k].0).collect();
        let functional = values.iter().zip(&weights).map(|(a, w)| a * w).sum();
        out.push(VirtualPath { values, functional, amplitude });
        // Odometer increment over eigenvalue indices.
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(out);
            }
            idx[pos] += 1;
            if idx[pos] < g {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Row-major matrix of [re, im] pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;
/// Vector of [re, im] pairs.
pub type VectorJson = Vec<[f64; 2]>;

/// JSON description of a finite system and transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub hamiltonian: MatrixJson,
    pub observable: MatrixJson,
    pub psi0: VectorJson,
    #[serde(default)]
    pub psi1: Option<VectorJson>,
    pub total_time: f64,
    pub coupling: Coupling,
    /// Normalize the supplied states instead of requiring unit norm.
    #[serde(default = "default_true")]
    pub normalize_states: bool,
}

fn default_true() -> bool {
    true
}

pub fn matrix_from_json(m: &MatrixJson) -> Result<CMatrix> {
    let n = m.len();
    if n == 0 || m.iter().any(|row| row.len() != n) {
        return Err(Error::invalid("matrix must be square and non-empty"));
    }
    Ok(CMatrix::from_fn(n, n, |r, c| C64::new(m[r][c][0], m[r][c][1])))
}

pub fn vector_from_json(v: &VectorJson) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|p| C64::new(p[0], p[1])))
}

impl SystemConfig {
    pub fn build(&self) -> Result<(FiniteSystem, TransitionSpec)> {
        let sys = FiniteSystem::new(matrix_from_json(&self.hamiltonian)?, matrix_from_json(&self.observable)?)?;
        let psi0 = vector_from_json(&self.psi0);
        let psi1 = self.psi1.as_ref().map(vector_from_json);
        let spec = if self.normalize_states {
            TransitionSpec::normalized(psi0, psi1, self.total_time, self.coupling)?
        } else {
            TransitionSpec::new(psi0, psi1, self.total_time, self.coupling)?
        };
        check_dims(&sys, &spec)?;
        Ok((sys, spec))
    }
}

/// Diagonal observable from real eigenvalues.
pub fn diagonal(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0))))
}

/// Real state vector, normalized.
pub fn real_state(components: &[f64]) -> CVector {
    let v = CVector::from_iterator(components.len(), components.iter().map(|&c| C64::new(c, 0.0)));
    let n = v.norm();
    v.unscale(n)
}

/// The two-level example: H = 0, A = diag(1, 2), Ψ₀ ∝ |1⟩+|2⟩, Ψ₁ ∝ |1⟩ − (1−ε)|2⟩.
pub fn two_level_example(eps: f64) -> Result<(FiniteSystem, TransitionSpec)> {
    let sys = FiniteSystem::new(CMatrix::zeros(2, 2), diagonal(&[1.0, 2.0]))?;
    let spec = TransitionSpec::new(
        real_state(&[1.0, 1.0]),
        Some(real_state(&[1.0, -(1.0 - eps)])),
        1.0,
        Coupling::Impulsive { t0: 0.5 },
    )?;
    Ok((sys, spec))
}

/// The three-box states with A = diag(1, 2, 3) and H = 0.
pub fn three_box_example() -> Result<(FiniteSystem, TransitionSpec)> {
    let sys = FiniteSystem::new(CMatrix::zeros(3, 3), diagonal(&[1.0, 2.0, 3.0]))?;
    let spec = TransitionSpec::new(
        real_state(&[1.0, 1.0, 1.0]),
        Some(real_state(&[1.0, 1.0, -1.0])),
        1.0,
        Coupling::Impulsive { t0: 0.5 },
    )?;
    Ok((sys, spec))
}
