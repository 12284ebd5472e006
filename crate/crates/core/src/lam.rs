//! Partial-wave angular amplitudes, the local angular momentum LAM(θ) and its
//! decomposition into an improper distribution over even L.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{simpson_weights, unwrap_phase, I};
use crate::C64;

/// Reported angles are kept inside [0.02π, 0.98π], away from the seam of the
/// π-periodic extension.
pub const THETA_MIN: f64 = 0.02 * PI;
pub const THETA_MAX: f64 = 0.98 * PI;

/// |f| below this multiple of the amplitude scale counts as an exact zero.
pub const LAM_THRESHOLD: f64 = 1e-14;

/// Overall constant in front of the partial-wave sum. Every reported quantity
/// is invariant under f → c·f, so the choice only affects |f|² units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prefactor {
    /// (ik)^{−1/2}
    #[default]
    Literal,
    /// (2ik)^{−1}
    Standard,
    Custom([f64; 2]),
}

impl Prefactor {
    pub fn value(&self, k: f64) -> C64 {
        match self {
            Prefactor::Literal => C64::new(0.0, k).powf(-0.5),
            Prefactor::Standard => (C64::new(0.0, 2.0 * k)).inv(),
            Prefactor::Custom([re, im]) => C64::new(*re, *im),
        }
    }
}

/// Anything with a θ-dependent amplitude and its analytic derivative.
pub trait AngularAmplitude {
    fn value(&self, theta: f64) -> C64;
    fn derivative(&self, theta: f64) -> C64;
    /// Typical |f|, used to decide when f is numerically zero.
    fn scale(&self) -> f64;
    /// Default truncation for the even-L sum.
    fn default_l_max(&self) -> usize;
}

/// S-matrix elements S^J for J = 0..J_max at one energy.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialWaveSet {
    pub energy: f64,
    pub k: f64,
    pub s_elements: Vec<C64>,
    pub prefactor: Prefactor,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialWaveJson {
    energy: f64,
    k: f64,
    s_elements: Vec<[f64; 2]>,
    #[serde(default)]
    prefactor: Prefactor,
}

const BUNDLED_CSV: &str = include_str!("../data/synthetic_13_waves.csv");

impl PartialWaveSet {
    pub fn new(energy: f64, k: f64, s_elements: Vec<C64>) -> Result<Self> {
        let pw = Self { energy, k, s_elements, prefactor: Prefactor::default() };
        pw.validate()?;
        Ok(pw)
    }

    pub fn with_prefactor(mut self, prefactor: Prefactor) -> Self {
        self.prefactor = prefactor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::invalid(format!("wavevector k must be positive and finite, got {}", self.k)));
        }
        if !self.energy.is_finite() {
            return Err(Error::invalid("energy must be finite"));
        }
        if self.s_elements.is_empty() {
            return Err(Error::invalid("no partial waves"));
        }
        if let Some(j) = self.s_elements.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::invalid(format!("S^{j} is not finite")));
        }
        Ok(())
    }

    pub fn j_max(&self) -> usize {
        self.s_elements.len() - 1
    }

    /// Synthetic 13-wave set (J = 0..12, odd waves empty) whose cross-section has
    /// a deep minimum near 50°. Only even J keeps f exactly π-periodic.
    pub fn bundled_synthetic() -> Self {
        Self::from_csv_reader(BUNDLED_CSV.as_bytes(), 1.0, 0.0).expect("bundled partial waves parse")
    }

    /// Reads `J,re,im` rows. The header is required and J must run 0, 1, 2, … .
    pub fn from_csv_reader<R: Read>(reader: R, k: f64, energy: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names != ["J", "re", "im"] {
            return Err(Error::Parse { line: 1, msg: format!("expected header `J,re,im`, found `{}`", names.join(",")) });
        }
        let mut s = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.len() != 3 {
                return Err(Error::Parse { line, msg: format!("expected 3 fields, found {}", record.len()) });
            }
            let j: usize = record[0]
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("J `{}` is not a non-negative integer", &record[0]) })?;
            if j != s.len() {
                return Err(Error::Parse { line, msg: format!("J values must be contiguous from 0; expected {}, found {j}", s.len()) });
            }
            let num = |i: usize| -> Result<f64> {
                let v: f64 = record[i]
                    .parse()
                    .map_err(|_| Error::Parse { line, msg: format!("`{}` is not a number", &record[i]) })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line, msg: format!("non-finite S-matrix element at J = {j}") });
                }
                Ok(v)
            };
            s.push(C64::new(num(1)?, num(2)?));
        }
        if s.is_empty() {
            return Err(Error::invalid("partial-wave file holds no rows"));
        }
        Self::new(energy, k, s)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: PartialWaveJson =
            serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        let s = raw.s_elements.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        Ok(Self::new(raw.energy, raw.k, s)?.with_prefactor(raw.prefactor))
    }

    pub fn to_json_string(&self) -> String {
        let raw = PartialWaveJson {
            energy: self.energy,
            k: self.k,
            s_elements: self.s_elements.iter().map(|s| [s.re, s.im]).collect(),
            prefactor: self.prefactor,
        };
        serde_json::to_string_pretty(&raw).expect("serializable")
    }
}

/// Loads a partial-wave set. `.json` files carry energy and k; CSV files carry
/// only `J,re,im`, so k = 1 and E = 0 are assumed (no reported quantity depends on them).
pub fn ingest_partial_waves(path: &Path) -> Result<PartialWaveSet> {
    let text = std::fs::read_to_string(path)?;
    if text.trim().is_empty() {
        return Err(Error::invalid(format!("{} is empty", path.display())));
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => PartialWaveSet::from_json_str(&text),
        _ => PartialWaveSet::from_csv_reader(text.as_bytes(), 1.0, 0.0),
    }
}

/// P_J(x) and dP_J/dx for J = 0..=n.
pub fn legendre(x: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n + 1];
    let mut dp = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for j in 1..n {
        let jf = j as f64;
        p[j + 1] = ((2.0 * jf + 1.0) * x * p[j] - jf * p[j - 1]) / (jf + 1.0);
        dp[j + 1] = dp[j - 1] + (2.0 * jf + 1.0) * p[j];
    }
    (p, dp)
}

impl AngularAmplitude for PartialWaveSet {
    fn value(&self, theta: f64) -> C64 {
        let (p, _) = legendre(theta.cos(), self.j_max());
        let sum: C64 = self.s_elements.iter().enumerate().map(|(j, s)| s * ((j as f64 + 0.5) * p[j])).sum();
        self.prefactor.value(self.k) * sum
    }

    fn derivative(&self, theta: f64) -> C64 {
        let (_, dp) = legendre(theta.cos(), self.j_max());
        let sin = theta.sin();
        let sum: C64 = self.s_elements.iter().enumerate().map(|(j, s)| s * (-(j as f64 + 0.5) * sin * dp[j])).sum();
        self.prefactor.value(self.k) * sum
    }

    fn scale(&self) -> f64 {
        let sum: f64 = self.s_elements.iter().enumerate().map(|(j, s)| (j as f64 + 0.5) * s.norm()).sum();
        self.prefactor.value(self.k).norm() * sum
    }

    fn default_l_max(&self) -> usize {
        let j = self.j_max();
        2 * (j + j % 2) + 8
    }
}

/// f(θ) = Σ c_n e^{iΛ_n θ}: a synthetic amplitude with known LAM.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaves {
    pub terms: Vec<(C64, f64)>,
}

impl PlaneWaves {
    pub fn new(terms: Vec<(C64, f64)>) -> Self {
        Self { terms }
    }
}

impl AngularAmplitude for PlaneWaves {
    fn value(&self, theta: f64) -> C64 {
        self.terms.iter().map(|(c, l)| c * (I * l * theta).exp()).sum()
    }

    fn derivative(&self, theta: f64) -> C64 {
        self.terms.iter().map(|(c, l)| c * I * l * (I * l * theta).exp()).sum()
    }

    fn scale(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.norm()).sum()
    }

    fn default_l_max(&self) -> usize {
        let m = self.terms.iter().map(|(_, l)| l.abs().ceil() as usize).max().unwrap_or(0);
        m + m % 2 + 8
    }
}

/// |f(θ)|².
pub fn dcs(amp: &dyn AngularAmplitude, theta: f64) -> f64 {
    amp.value(theta).norm_sqr()
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < PI {
        Ok(())
    } else {
        Err(Error::invalid(format!("θ = {theta} must lie strictly inside (0, π)")))
    }
}

fn nonvanishing(amp: &dyn AngularAmplitude, theta: f64) -> Result<C64> {
    let f = amp.value(theta);
    let threshold = LAM_THRESHOLD * amp.scale();
    if f.norm() <= threshold {
        return Err(Error::DegenerateNormalization { norm: f.norm(), threshold });
    }
    Ok(f)
}

/// LAM(θ) = Re[−i f′/f], with f′ from the Legendre derivative recurrence.
pub fn lam(amp: &dyn AngularAmplitude, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let f = nonvanishing(amp, theta)?;
    Ok((-I * amp.derivative(theta) / f).re)
}

/// LAM from a Richardson-extrapolated central difference of the phase of f.
pub fn lam_finite_difference(amp: &dyn AngularAmplitude, theta: f64, h: f64) -> Result<f64> {
    check_theta(theta)?;
    nonvanishing(amp, theta)?;
    let slope = |h: f64| (amp.value(theta + h) / amp.value(theta - h)).arg() / (2.0 * h);
    Ok((4.0 * slope(h / 2.0) - slope(h)) / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    /// Largest |L|; must be even. `None` uses the amplitude's default.
    pub l_max: Option<usize>,
    /// Simpson panels on [0, π].
    pub panels: usize,
    /// Allowed |Σ Φ_L − f| / |f|.
    pub tolerance: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { l_max: None, panels: 4096, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LamDecomposition {
    pub theta: f64,
    pub l_values: Vec<i64>,
    pub phi_l: Vec<C64>,
    pub w_l: Vec<f64>,
    /// Σ_L L w_L.
    pub lam: f64,
    /// Re[−i f′/f] evaluated directly.
    pub lam_direct: f64,
    pub reconstruction_error: f64,
}

impl LamDecomposition {
    pub fn weight_sum(&self) -> f64 {
        self.w_l.iter().sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.w_l.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Splits LAM(θ) into Σ_L L w_L over even L ∈ [−L_max, L_max], with
/// Φ_L(θ) = π⁻¹e^{iLθ}∫₀^π f(θ′)e^{−iLθ′}dθ′.
pub fn decompose(amp: &dyn AngularAmplitude, theta: f64, opts: &DecomposeOptions) -> Result<LamDecomposition> {
    check_theta(theta)?;
    let l_max = opts.l_max.unwrap_or_else(|| amp.default_l_max());
    if !l_max.is_multiple_of(2) {
        return Err(Error::invalid(format!("L_max must be even, got {l_max}")));
    }
    if opts.panels < 2 || !opts.panels.is_multiple_of(2) {
        return Err(Error::invalid("Simpson needs an even number of panels ≥ 2"));
    }
    let f = nonvanishing(amp, theta)?;
    let h = PI / opts.panels as f64;
    let weights = simpson_weights(opts.panels, h);
    let samples: Vec<C64> =
        weights.iter().enumerate().map(|(i, w)| amp.value(i as f64 * h) * *w).collect();

    let l_values: Vec<i64> = (-(l_max as i64)..=l_max as i64).step_by(2).collect();
    let phi_l: Vec<C64> = l_values
        .iter()
        .map(|&l| {
            let lf = l as f64;
            let step = (-I * lf * h).exp();
            let mut rot = C64::new(1.0, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for s in &samples {
                acc += s * rot;
                rot *= step;
            }
            (I * lf * theta).exp() * acc / PI
        })
        .collect();

    let total: C64 = phi_l.iter().sum();
    let reconstruction_error = (total - f).norm() / f.norm();
    if !(reconstruction_error <= opts.tolerance) {
        return Err(Error::precondition(format!(
            "even-L sum reconstructs f(θ) only to {reconstruction_error:.3e} (tolerance {:.1e}) at L_max = {l_max}; \
             increase L_max",
            opts.tolerance
        )));
    }
    let w_l: Vec<f64> = phi_l.iter().map(|p| (p / total).re).collect();
    let lam_weighted = l_values.iter().zip(&w_l).map(|(l, w)| *l as f64 * w).sum();
    Ok(LamDecomposition {
        theta,
        l_values,
        phi_l,
        w_l,
        lam: lam_weighted,
        lam_direct: (-I * amp.derivative(theta) / f).re,
        reconstruction_error,
    })
}

/// n equally spaced angles spanning [THETA_MIN, THETA_MAX].
pub fn theta_grid(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|i| THETA_MIN + (THETA_MAX - THETA_MIN) * i as f64 / (n - 1) as f64).collect()
}

/// The angle of smallest |f|² on a grid, refined by golden-section search.
pub fn dcs_minimum(amp: &dyn AngularAmplitude, lo: f64, hi: f64) -> f64 {
    let n = 2000;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| dcs(amp, *a.1).total_cmp(&dcs(amp, *b.1)))
        .map(|(i, _)| i)
        .unwrap();
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if dcs(amp, c) < dcs(amp, d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_dcs_csv<W: Write>(amp: &dyn AngularAmplitude, thetas: &[f64], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["theta", "dcs"])?;
    for &t in thetas {
        w.write_record([t.to_string(), dcs(amp, t).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_lam_csv<W: Write>(amp: &dyn AngularAmplitude, thetas: &[f64], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["theta", "lam"])?;
    for &t in thetas {
        w.write_record([t.to_string(), lam(amp, t)?.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_weights_csv<W: Write>(d: &LamDecomposition, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["L", "w_L"])?;
    for (l, wl) in d.l_values.iter().zip(&d.w_l) {
        w.write_record([l.to_string(), wl.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Unwrapped phase of f along a θ-grid, for plotting alongside LAM.
pub fn unwrapped_phase(amp: &dyn AngularAmplitude, thetas: &[f64]) -> Vec<f64> {
    let mut ph: Vec<f64> = thetas.iter().map(|&t| amp.value(t).arg()).collect();
    unwrap_phase(&mut ph);
    ph
}
