//! Classical inaccurate meter: free-particle functionals, convolution with the apparatus
//! profile, noisy-reading estimators and the Monte-Carlo cost of the low-accuracy limit.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dist::{HybridDistribution, Spike};
use crate::error::{Error, Result};
use crate::numerics::{fft, trapezoid_real, C64};

/// Half-width, in units of α, beyond which the Gaussian base profile is treated as zero.
const GAUSSIAN_Z_EXTENT: f64 = 8.5;

/// Shape of the meter's initial profile in the scaled variable z = f/α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseProfile {
    /// g(z) = e^{−z²}.
    Gaussian,
    /// Samples of g on the symmetric grid z_i = (i − (n−1)/2)·z_step; zero outside.
    Sampled { z_step: f64, values: Vec<f64> },
}

/// Real, even meter profile G(f) = g(f/α). α = 0 denotes an ideal (δ) meter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApparatusProfile {
    base: BaseProfile,
    alpha: f64,
}

impl ApparatusProfile {
    pub fn gaussian(alpha: f64) -> Result<Self> {
        Self::new(BaseProfile::Gaussian, alpha)
    }

    /// The exact meter: convolution acts as the identity.
    pub fn ideal() -> Self {
        Self { base: BaseProfile::Gaussian, alpha: 0.0 }
    }

    pub fn new(base: BaseProfile, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be finite and non-negative, got {alpha}")));
        }
        if let BaseProfile::Sampled { z_step, values } = &base {
            let n = values.len();
            if n < 3 || n % 2 == 0 || !(*z_step > 0.0) {
                return Err(Error::invalid("sampled profile needs an odd number (>= 3) of samples and z_step > 0"));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("sampled profile contains non-finite values"));
            }
            let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !(scale > 0.0) {
                return Err(Error::invalid("sampled profile is identically zero"));
            }
            for i in 0..n / 2 {
                if (values[i] - values[n - 1 - i]).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!("profile is not even: sample {i} differs from its mirror")));
                }
            }
        }
        Ok(Self { base, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn base(&self) -> &BaseProfile {
        &self.base
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.base.clone(), alpha)
    }

    pub fn is_ideal(&self) -> bool {
        self.alpha == 0.0
    }

    /// g(z).
    pub fn base_value(&self, z: f64) -> f64 {
        match &self.base {
            BaseProfile::Gaussian => (-z * z).exp(),
            BaseProfile::Sampled { z_step, values } => {
                let half = (values.len() / 2) as f64;
                let t = z.abs() / z_step;
                if t >= half {
                    return if t == half { values[values.len() - 1] } else { 0.0 };
                }
                let i = t.floor();
                let u = t - i;
                let c = values.len() / 2 + i as usize;
                values[c] * (1.0 - u) + values[c + 1] * u
            }
        }
    }

    /// Extent of the base profile's support in z.
    pub fn z_extent(&self) -> f64 {
        match &self.base {
            BaseProfile::Gaussian => GAUSSIAN_Z_EXTENT,
            BaseProfile::Sampled { z_step, values } => (values.len() / 2) as f64 * z_step,
        }
    }

    /// Half-width of G in f units.
    pub fn half_width(&self) -> f64 {
        self.alpha * self.z_extent()
    }

    /// ∫ z^n g(z)^p dz.
    fn base_integral(&self, n: i32, p: i32) -> f64 {
        match &self.base {
            BaseProfile::Gaussian => {
                // ∫ z^n e^{−p z²} dz for even n.
                if n % 2 == 1 {
                    return 0.0;
                }
                let pf = p as f64;
                let mut v = (PI / pf).sqrt();
                for k in 0..n / 2 {
                    v *= (2 * k + 1) as f64 / (2.0 * pf);
                }
                v
            }
            BaseProfile::Sampled { z_step, values } => {
                let half = (values.len() / 2) as f64;
                let w: Vec<f64> = values
                    .iter()
                    .enumerate()
                    .map(|(i, g)| ((i as f64 - half) * z_step).powi(n) * g.powi(p))
                    .collect();
                trapezoid_real(&w, *z_step)
            }
        }
    }

    /// G used as a probability density: g(f/α)/(α∫g).
    pub fn density(&self, f: f64) -> f64 {
        self.base_value(f / self.alpha) / (self.alpha * self.base_integral(0, 1))
    }

    /// G used as a meter amplitude: g(f/α), unnormalized.
    pub fn amplitude(&self, f: f64) -> f64 {
        self.base_value(f / self.alpha)
    }

    /// ∫ G(f) df for the amplitude g(f/α).
    pub fn amplitude_integral(&self) -> f64 {
        self.alpha * self.base_integral(0, 1)
    }

    /// ∫ G(f)² df for the amplitude g(f/α).
    pub fn amplitude_norm_sq(&self) -> f64 {
        self.alpha * self.base_integral(0, 2)
    }

    /// ⟨f²⟩_G with G as a probability density.
    pub fn density_second_moment(&self) -> f64 {
        self.alpha * self.alpha * self.base_integral(2, 1) / self.base_integral(0, 1)
    }

    /// Raw moments ⟨f^n⟩_G (density), n = 0..=max.
    pub fn density_moments(&self, max: usize) -> Vec<f64> {
        let norm = self.base_integral(0, 1);
        (0..=max)
            .map(|n| self.alpha.powi(n as i32) * self.base_integral(n as i32, 1) / norm)
            .collect()
    }

    /// ⟨z²⟩ weighted by g², the coefficient of α² in the quantum meter's second moment.
    pub fn amplitude_z2(&self) -> f64 {
        self.base_integral(2, 2) / self.base_integral(0, 2)
    }

    /// g̃(λ) = ∫ g(z) e^{−iλz} dz (real because g is even).
    pub fn base_fourier(&self, lambda: f64) -> f64 {
        match &self.base {
            BaseProfile::Gaussian => PI.sqrt() * (-lambda * lambda / 4.0).exp(),
            BaseProfile::Sampled { z_step, values } => {
                let half = (values.len() / 2) as f64;
                let w: Vec<f64> = values
                    .iter()
                    .enumerate()
                    .map(|(i, g)| g * (lambda * (i as f64 - half) * z_step).cos())
                    .collect();
                trapezoid_real(&w, *z_step)
            }
        }
    }

    /// The factor C multiplying (Re f̄² − |f̄|²) in the large-α second moment, from
    /// quadrature over the profile's Fourier transform g̃ and its second derivative.
    pub fn c_factor(&self) -> f64 {
        let (lambda_max, dz, zs, gs): (f64, f64, Vec<f64>, Vec<f64>) = match &self.base {
            BaseProfile::Gaussian => {
                let dz = 0.02;
                let n = (2.0 * GAUSSIAN_Z_EXTENT / dz).round() as usize + 1;
                let zs: Vec<f64> = (0..n).map(|i| -GAUSSIAN_Z_EXTENT + i as f64 * dz).collect();
                let gs = zs.iter().map(|z| (-z * z).exp()).collect();
                (40.0, dz, zs, gs)
            }
            BaseProfile::Sampled { z_step, values } => {
                let half = (values.len() / 2) as f64;
                let zs = (0..values.len()).map(|i| (i as f64 - half) * z_step).collect();
                (PI / z_step, *z_step, zs, values.clone())
            }
        };
        let n_lambda = 4001;
        let dl = 2.0 * lambda_max / (n_lambda - 1) as f64;
        let mut gt = Vec::with_capacity(n_lambda);
        let mut gt2 = Vec::with_capacity(n_lambda);
        for i in 0..n_lambda {
            let l = -lambda_max + i as f64 * dl;
            let a: Vec<f64> = zs.iter().zip(&gs).map(|(z, g)| g * (l * z).cos()).collect();
            let b: Vec<f64> = zs.iter().zip(&gs).map(|(z, g)| -z * z * g * (l * z).cos()).collect();
            gt.push(trapezoid_real(&a, dz));
            gt2.push(trapezoid_real(&b, dz));
        }
        let lam = |i: usize| -lambda_max + i as f64 * dl;
        let int = |f: &dyn Fn(usize) -> f64| {
            let v: Vec<f64> = (0..n_lambda).map(f).collect();
            trapezoid_real(&v, dl)
        };
        let norm = int(&|i| gt[i] * gt[i]);
        let a = int(&|i| lam(i).powi(2) * gt[i] * gt2[i]) / norm;
        let b = int(&|i| lam(i).powi(2) * gt[i] * gt[i]) / norm;
        let c = int(&|i| gt[i] * gt2[i]) / norm;
        a - b * c
    }

    /// Sampler for meter noise drawn from G used as a density.
    pub fn noise_sampler(&self) -> NoiseSampler {
        if self.is_ideal() {
            return NoiseSampler::Zero;
        }
        match &self.base {
            BaseProfile::Gaussian => {
                NoiseSampler::Normal(Normal::new(0.0, self.alpha / 2f64.sqrt()).expect("positive width"))
            }
            BaseProfile::Sampled { z_step, values } => {
                let half = (values.len() / 2) as f64;
                let d = HybridDistribution::sampled(
                    -half * z_step,
                    *z_step,
                    values.iter().map(|v| C64::new(v.max(0.0), 0.0)).collect(),
                )
                .expect("validated profile");
                NoiseSampler::Table(ReadingSampler::new(&d).expect("profile has mass"), self.alpha)
            }
        }
    }
}

/// Draws meter noise; see [`ApparatusProfile::noise_sampler`].
#[derive(Debug, Clone)]
pub enum NoiseSampler {
    Zero,
    Normal(Normal<f64>),
    Table(ReadingSampler, f64),
}

impl NoiseSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSampler::Zero => 0.0,
            NoiseSampler::Normal(n) => n.sample(rng),
            NoiseSampler::Table(s, alpha) => alpha * s.sample(rng),
        }
    }
}

/// Switching function β(t) of the classical coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Switching {
    /// β = δ(t′ − t0).
    Impulsive { t0: f64 },
    /// β = 1 on [0, t].
    Constant { t: f64 },
}

/// The measured dynamical variable A(p, x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalObservable {
    Position,
    /// Indicator of x ∈ [lo, hi].
    Indicator { lo: f64, hi: f64 },
}

/// Free particles with independent Gaussian initial momentum and position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEnsemble {
    pub p_mean: f64,
    pub p_std: f64,
    pub x_mean: f64,
    pub x_std: f64,
    pub switching: Switching,
    pub observable: ClassicalObservable,
}

/// Histogram layout: `count` equal bins on [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl ClassicalEnsemble {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_std >= 0.0 && self.x_std >= 0.0) {
            return Err(Error::invalid("ensemble widths must be non-negative"));
        }
        match self.switching {
            Switching::Impulsive { t0 } if !t0.is_finite() => Err(Error::invalid("t0 must be finite")),
            Switching::Constant { t } if !(t > 0.0) => Err(Error::invalid("coupling duration must be positive")),
            _ => Ok(()),
        }?;
        if let ClassicalObservable::Indicator { lo, hi } = self.observable {
            if !(hi > lo) {
                return Err(Error::invalid("indicator region needs hi > lo"));
            }
        }
        Ok(())
    }

    /// f = ∫β(t′)A(x(t′))dt′ along the free trajectory x(t′) = X + P t′.
    pub fn functional(&self, p: f64, x: f64) -> f64 {
        match (self.switching, self.observable) {
            (Switching::Impulsive { t0 }, ClassicalObservable::Position) => x + p * t0,
            (Switching::Impulsive { t0 }, ClassicalObservable::Indicator { lo, hi }) => {
                let xt = x + p * t0;
                if xt >= lo && xt <= hi {
                    1.0
                } else {
                    0.0
                }
            }
            (Switching::Constant { t }, ClassicalObservable::Position) => x * t + 0.5 * p * t * t,
            (Switching::Constant { t }, ClassicalObservable::Indicator { lo, hi }) => {
                if p == 0.0 {
                    return if x >= lo && x <= hi { t } else { 0.0 };
                }
                let (a, b) = ((lo - x) / p, (hi - x) / p);
                let (enter, leave) = if a < b { (a, b) } else { (b, a) };
                (leave.min(t) - enter.max(0.0)).max(0.0)
            }
        }
    }

    /// Seeded draw of `n` functional values.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let np = Normal::new(self.p_mean, self.p_std).map_err(|e| Error::invalid(e.to_string()))?;
        let nx = Normal::new(self.x_mean, self.x_std).map_err(|e| Error::invalid(e.to_string()))?;
        Ok((0..n)
            .map(|_| {
                let p = np.sample(&mut rng);
                let x = nx.sample(&mut rng);
                self.functional(p, x)
            })
            .collect())
    }

    /// Histogram estimate of the reading distribution w(f), normalized to the in-range fraction.
    pub fn functional_distribution(&self, n_samples: usize, bins: Bins, seed: u64) -> Result<HybridDistribution> {
        if n_samples < 100 {
            return Err(Error::invalid(format!("need at least 100 samples, got {n_samples}")));
        }
        if bins.count < 2 || !(bins.hi > bins.lo) {
            return Err(Error::invalid("need at least two bins on a non-empty range"));
        }
        let width = (bins.hi - bins.lo) / bins.count as f64;
        let mut counts = vec![0usize; bins.count];
        for f in self.sample(n_samples, seed)? {
            if f >= bins.lo && f <= bins.hi {
                let k = (((f - bins.lo) / width) as usize).min(bins.count - 1);
                counts[k] += 1;
            }
        }
        let values = counts
            .iter()
            .map(|&c| C64::new(c as f64 / (n_samples as f64 * width), 0.0))
            .collect();
        HybridDistribution::sampled(bins.lo + 0.5 * width, width, values)
    }

    /// ⟨f^order⟩ by tensor trapezoid quadrature over w(P, X) on ±8σ with `nodes` points per axis.
    pub fn moment_by_quadrature(&self, order: i32, nodes: usize) -> f64 {
        let axis = |mean: f64, std: f64| -> Vec<(f64, f64)> {
            if std == 0.0 {
                return vec![(mean, 1.0)];
            }
            let h = 16.0 * std / (nodes - 1) as f64;
            (0..nodes)
                .map(|i| {
                    let v = mean - 8.0 * std + i as f64 * h;
                    let end = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
                    let w = end * h * (-(v - mean).powi(2) / (2.0 * std * std)).exp() / (std * (2.0 * PI).sqrt());
                    (v, w)
                })
                .collect()
        };
        let ps = axis(self.p_mean, self.p_std);
        let xs = axis(self.x_mean, self.x_std);
        let mut acc = 0.0;
        for &(p, wp) in &ps {
            for &(x, wx) in &xs {
                acc += wp * wx * self.functional(p, x).powi(order);
            }
        }
        acc
    }
}

/// W = w ⋆ G on a uniform grid. Spikes of w become shifted copies of G.
pub fn convolve_readings(w: &HybridDistribution, g: &ApparatusProfile) -> Result<HybridDistribution> {
    let (lo, hi) = w
        .support()
        .ok_or_else(|| Error::invalid("cannot convolve an empty distribution"))?;
    let h = if w.values().len() >= 2 { w.grid_step() } else { g.alpha() / 32.0 };
    if g.is_ideal() || (w.values().len() >= 2 && g.half_width() < h) {
        return Ok(w.clone());
    }
    let m = (g.half_width() / h).ceil() as usize;
    // Output grid: aligned with w's smooth grid when present, padded by the kernel reach.
    let anchor = if w.values().len() >= 2 { w.grid_start() } else { lo };
    let below = ((anchor - lo) / h).ceil() as usize + m;
    let start = anchor - below as f64 * h;
    let n_out = ((hi + m as f64 * h - start) / h).ceil() as usize + 1;
    let mut out = vec![C64::new(0.0, 0.0); n_out];

    let n_in = w.values().len();
    if n_in >= 2 {
        let kernel: Vec<f64> = (0..=2 * m).map(|k| g.density((k as f64 - m as f64) * h)).collect();
        let ksum: f64 = kernel.iter().sum::<f64>() * h;
        let len = (n_in + 2 * m).next_power_of_two().max(4 * (n_in.max(2 * m + 1))).next_power_of_two();
        let mut a = vec![C64::new(0.0, 0.0); len];
        for (j, v) in w.values().iter().enumerate() {
            let end = if j == 0 || j == n_in - 1 { 0.5 } else { 1.0 };
            a[j] = v * (end * h);
        }
        let mut b = vec![C64::new(0.0, 0.0); len];
        for (k, kv) in kernel.iter().enumerate() {
            b[k] = C64::new(kv / ksum, 0.0);
        }
        fft(&mut a, false);
        fft(&mut b, false);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        fft(&mut a, true);
        let offset = below - m;
        for (i, v) in a.iter().take(n_in + 2 * m).enumerate() {
            out[offset + i] += v / len as f64;
        }
    }
    for s in w.spikes() {
        for (i, o) in out.iter_mut().enumerate() {
            let x = start + i as f64 * h;
            let d = x - s.location;
            if d.abs() <= g.half_width() {
                *o += s.weight * g.density(d);
            }
        }
    }
    HybridDistribution::sampled(start, h, out)
}

/// ∫ d(f) e^{−iλf} df, unnormalized.
pub fn generating_function(d: &HybridDistribution, lambda: f64) -> C64 {
    let kernel = |x: f64| C64::from_polar(1.0, -lambda * x);
    let smooth: Vec<C64> = d.values().iter().enumerate().map(|(i, v)| v * kernel(d.x(i))).collect();
    let s = crate::numerics::trapezoid(&smooth, d.grid_step());
    s + d.spikes().iter().map(|sp| sp.weight * kernel(sp.location)).sum::<C64>()
}

/// ⟨f^n⟩ of a convolution from the moments of its factors (index k holds ⟨f^k⟩, k = 0..).
pub fn binomial_convolution_moments(g: &[f64], w: &[f64], n: usize) -> f64 {
    let mut binom = 1.0;
    let mut acc = 0.0;
    for k in 0..=n {
        acc += binom * g[k] * w[n - k];
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    acc
}

/// Inverse-CDF sampler for a proper distribution: exact for spikes, piecewise linear density
/// within each smooth cell.
#[derive(Debug, Clone)]
pub struct ReadingSampler {
    cumulative: Vec<f64>,
    atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Copy)]
enum Atom {
    Point(f64),
    Cell { x0: f64, h: f64, d0: f64, d1: f64 },
}

impl ReadingSampler {
    pub fn new(w: &HybridDistribution) -> Result<Self> {
        if !w.is_proper() {
            return Err(Error::invalid("sampling requires a non-negative real distribution"));
        }
        let mut atoms = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for s in w.spikes() {
            if s.weight.re > 0.0 {
                total += s.weight.re;
                atoms.push(Atom::Point(s.location));
                cumulative.push(total);
            }
        }
        let h = w.grid_step();
        for pair in w.values().windows(2).enumerate() {
            let (i, v) = pair;
            let mass = 0.5 * (v[0].re + v[1].re) * h;
            if mass > 0.0 {
                total += mass;
                atoms.push(Atom::Cell { x0: w.x(i), h, d0: v[0].re, d1: v[1].re });
                cumulative.push(total);
            }
        }
        if !(total > 0.0) {
            return Err(Error::invalid("distribution has zero mass"));
        }
        Ok(Self { cumulative, atoms })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cumulative.last().expect("non-empty");
        let r = rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|&c| c <= r).min(self.atoms.len() - 1);
        match self.atoms[k] {
            Atom::Point(x) => x,
            Atom::Cell { x0, h, d0, d1 } => {
                let u: f64 = rng.random();
                let mass = 0.5 * (d0 + d1) * h;
                let a = (d1 - d0) / (2.0 * h);
                let target = u * mass;
                x0 + 2.0 * target / (d0 + (d0 * d0 + 4.0 * a * target).max(0.0).sqrt())
            }
        }
    }
}

/// Sample statistics of noisy readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisyEstimate {
    /// Estimates ⟨f⟩_w.
    pub mean: f64,
    /// ⟨f²⟩_W − ⟨f²⟩_G, estimating ⟨f²⟩_w.
    pub second_moment: f64,
    pub mean_stderr: f64,
    pub second_moment_stderr: f64,
}

/// Draws `n` readings from W = w ⋆ G (reading from w plus independent meter noise).
pub fn estimate_from_noisy_readings(
    w: &HybridDistribution,
    g: &ApparatusProfile,
    n: usize,
    seed: u64,
) -> Result<NoisyEstimate> {
    if n < 1 {
        return Err(Error::invalid("need at least one reading"));
    }
    let sampler = ReadingSampler::new(w)?;
    let noise = g.noise_sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let x = sampler.sample(&mut rng) + noise.sample(&mut rng);
        let x2 = x * x;
        s1 += x;
        s2 += x2;
        s4 += x2 * x2;
    }
    let nf = n as f64;
    let mean = s1 / nf;
    let m2 = s2 / nf;
    let var = (m2 - mean * mean).max(0.0);
    let var2 = (s4 / nf - m2 * m2).max(0.0);
    let denom = if n > 1 { nf - 1.0 } else { 1.0 };
    Ok(NoisyEstimate {
        mean,
        second_moment: m2 - g.density_second_moment(),
        mean_stderr: (var * nf / denom / nf).sqrt(),
        second_moment_stderr: (var2 * nf / denom / nf).sqrt(),
    })
}

/// Fraction of `reps` independent N-reading experiments whose mean lies within `delta` of `truth`.
pub fn success_fraction(
    w: &HybridDistribution,
    g: &ApparatusProfile,
    truth: f64,
    n: usize,
    delta: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    let seeds: Vec<u64> = (0..reps as u64)
        .map(|r| seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ r.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .collect();
    let threads = std::thread::available_parallelism().map(|t| t.get()).unwrap_or(1).min(reps.max(1));
    let chunk = reps.div_ceil(threads.max(1)).max(1);
    let hits: Result<usize> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || -> Result<usize> {
                    let mut hits = 0;
                    for &s in part {
                        let est = estimate_from_noisy_readings(w, g, n, s)?;
                        if (est.mean - truth).abs() < delta {
                            hits += 1;
                        }
                    }
                    Ok(hits)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).sum()
    });
    Ok(hits? as f64 / reps as f64)
}

/// Settings for the required-N experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequiredNConfig {
    pub delta: f64,
    pub confidence: f64,
    pub reps: usize,
    /// Ladder of candidate N: n_min·ratio^k.
    pub n_min: usize,
    pub ratio: f64,
    pub n_max: usize,
}

impl Default for RequiredNConfig {
    fn default() -> Self {
        Self { delta: 0.05, confidence: 0.95, reps: 100, n_min: 8, ratio: 2f64.powf(0.25), n_max: 50_000_000 }
    }
}

/// Smallest ladder N whose success fraction reaches the confidence level.
pub fn required_samples(
    w: &HybridDistribution,
    g: &ApparatusProfile,
    truth: f64,
    cfg: &RequiredNConfig,
    seed: u64,
) -> Result<usize> {
    let ladder: Vec<usize> = {
        let mut v = Vec::new();
        let mut x = cfg.n_min as f64;
        while x <= cfg.n_max as f64 {
            let n = x.round() as usize;
            if v.last() != Some(&n) {
                v.push(n);
            }
            x *= cfg.ratio;
        }
        v
    };
    let ok = |n: usize| -> Result<bool> {
        Ok(success_fraction(w, g, truth, n, cfg.delta, cfg.reps, seed)? >= cfg.confidence)
    };
    // Climb by doubling N, so the work stays within a few times the cost at the
    // answer and never overshoots it by more than 2×, then bisect the last bracket.
    if ok(ladder[0])? {
        return Ok(ladder[0]);
    }
    let stride = ((2f64.ln() / cfg.ratio.ln()).round() as usize).max(1);
    let mut lo = 0usize;
    let mut hi = loop {
        let probe = (lo + stride).min(ladder.len() - 1);
        if ok(ladder[probe])? {
            break probe;
        }
        if probe == ladder.len() - 1 {
            return Err(Error::precondition(format!("no N up to {} reaches the requested accuracy", cfg.n_max)));
        }
        lo = probe;
    };
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(ladder[mid])? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ladder[hi])
}

/// Required N for each α and the fitted exponent of N ∝ α^k.
pub fn required_n_scaling(
    w: &HybridDistribution,
    base: &ApparatusProfile,
    truth: f64,
    alphas: &[f64],
    cfg: &RequiredNConfig,
    seed: u64,
) -> Result<(f64, Vec<(f64, usize)>)> {
    let mut table = Vec::new();
    for (i, &a) in alphas.iter().enumerate() {
        let g = base.with_alpha(a)?;
        table.push((a, required_samples(w, &g, truth, cfg, seed.wrapping_add(i as u64))?));
    }
    let lx: Vec<f64> = table.iter().map(|(a, _)| a.ln()).collect();
    let ly: Vec<f64> = table.iter().map(|(_, n)| (*n as f64).ln()).collect();
    Ok((crate::numerics::linear_fit(&lx, &ly).0, table))
}

/// δ(f − c) with unit weight.
pub fn point_reading(c: f64) -> HybridDistribution {
    HybridDistribution::from_spikes(vec![Spike::new(c, C64::new(1.0, 0.0))]).expect("finite location")
}
