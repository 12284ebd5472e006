//! Proper, sign-alternating and complex distributions: a smooth part sampled on a uniform
//! grid plus a list of weighted point spikes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bisect, trapezoid, C64};

/// Relative factor for the degeneracy threshold on |∫ρ|.
pub const DEFAULT_DEGENERACY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub location: f64,
    pub weight: C64,
}

impl Spike {
    pub fn new(location: f64, weight: C64) -> Self {
        Self { location, weight }
    }
}

/// Complex distribution: trapezoid-integrated samples plus exact spikes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridDistribution {
    grid_start: f64,
    grid_step: f64,
    values: Vec<C64>,
    spikes: Vec<Spike>,
}

fn same_location(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

impl HybridDistribution {
    /// Validates the layout, sorts spikes and merges coincident spike locations.
    pub fn new(grid_start: f64, grid_step: f64, values: Vec<C64>, spikes: Vec<Spike>) -> Result<Self> {
        if !(grid_step > 0.0) || !grid_step.is_finite() || !grid_start.is_finite() {
            return Err(Error::invalid(format!("grid step must be positive and finite, got {grid_step}")));
        }
        if values.len() == 1 {
            return Err(Error::invalid("a smooth part needs at least two samples"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("non-finite sample in smooth part"));
        }
        let mut spikes = spikes;
        if spikes.iter().any(|s| !s.location.is_finite() || !s.weight.re.is_finite() || !s.weight.im.is_finite()) {
            return Err(Error::invalid("spike locations and weights must be finite"));
        }
        spikes.sort_by(|a, b| a.location.total_cmp(&b.location));
        let mut merged: Vec<Spike> = Vec::with_capacity(spikes.len());
        for s in spikes {
            match merged.last_mut() {
                Some(last) if same_location(last.location, s.location) => last.weight += s.weight,
                _ => merged.push(s),
            }
        }
        Ok(Self { grid_start, grid_step, values, spikes: merged })
    }

    /// Smooth-only distribution.
    pub fn sampled(grid_start: f64, grid_step: f64, values: Vec<C64>) -> Result<Self> {
        Self::new(grid_start, grid_step, values, Vec::new())
    }

    /// Spike-only distribution.
    pub fn from_spikes(spikes: Vec<Spike>) -> Result<Self> {
        Self::new(0.0, 1.0, Vec::new(), spikes)
    }

    /// Samples `f` at `points` equally spaced nodes covering [a, b].
    pub fn from_fn(a: f64, b: f64, points: usize, f: impl Fn(f64) -> C64) -> Result<Self> {
        if points < 2 || !(b > a) {
            return Err(Error::invalid("need b > a and at least two points"));
        }
        let h = (b - a) / (points - 1) as f64;
        let values = (0..points).map(|i| f(a + i as f64 * h)).collect();
        Self::sampled(a, h, values)
    }

    pub fn grid_start(&self) -> f64 {
        self.grid_start
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn grid_end(&self) -> f64 {
        self.grid_start + self.grid_step * self.values.len().saturating_sub(1) as f64
    }

    /// Abscissa of the i-th smooth sample.
    pub fn x(&self, i: usize) -> f64 {
        self.grid_start + i as f64 * self.grid_step
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.x(i))
    }

    /// Smallest interval containing the smooth grid and every spike.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if !self.values.is_empty() {
            lo = self.grid_start;
            hi = self.grid_end();
        }
        for s in &self.spikes {
            lo = lo.min(s.location);
            hi = hi.max(s.location);
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Applies `f` to smooth samples and spike weights alike.
    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            grid_start: self.grid_start,
            grid_step: self.grid_step,
            values: self.values.iter().map(|&v| f(v)).collect(),
            spikes: self.spikes.iter().map(|s| Spike::new(s.location, f(s.weight))).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }

    /// Linear interpolation of the smooth part (zero outside the grid).
    pub fn smooth_at(&self, x: f64) -> C64 {
        let n = self.values.len();
        if n < 2 || x < self.grid_start || x > self.grid_end() {
            return C64::new(0.0, 0.0);
        }
        let t = (x - self.grid_start) / self.grid_step;
        let i = (t.floor() as usize).min(n - 2);
        let u = t - i as f64;
        self.values[i] * (1.0 - u) + self.values[i + 1] * u
    }

    fn smooth_integral(&self, a: f64, b: f64) -> C64 {
        let n = self.values.len();
        if n < 2 {
            return C64::new(0.0, 0.0);
        }
        let (x0, x1) = (self.grid_start, self.grid_end());
        let lo = a.max(x0);
        let hi = b.min(x1);
        if !(hi > lo) {
            return C64::new(0.0, 0.0);
        }
        if lo <= x0 && hi >= x1 {
            return trapezoid(&self.values, self.grid_step);
        }
        let h = self.grid_step;
        let first = (((lo - x0) / h).floor() as usize).min(n - 2);
        let last = (((hi - x0) / h).ceil() as usize).clamp(first + 1, n - 1);
        let mut acc = C64::new(0.0, 0.0);
        for c in first..last {
            let xl = self.x(c).max(lo);
            let xr = (self.x(c) + h).min(hi);
            if xr > xl {
                acc += (self.smooth_at(xl) + self.smooth_at(xr)) * (0.5 * (xr - xl));
            }
        }
        acc
    }

    /// Trapezoid integral of the smooth part over [a, b] plus spikes with a ≤ location ≤ b.
    pub fn integrate(&self, a: f64, b: f64) -> Result<C64> {
        if !(a <= b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!("integration bounds must satisfy a <= b, got [{a}, {b}]")));
        }
        let spikes: C64 = self
            .spikes
            .iter()
            .filter(|s| s.location >= a && s.location <= b)
            .map(|s| s.weight)
            .sum();
        Ok(self.smooth_integral(a, b) + spikes)
    }

    /// ∫ρ over the whole support.
    pub fn norm(&self) -> C64 {
        self.raw_integral(0)
    }

    /// ∫ f^n ρ df over the whole support.
    pub fn raw_integral(&self, n: i32) -> C64 {
        let smooth = if self.values.len() >= 2 {
            let w: Vec<C64> = self
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| v * self.x(i).powi(n))
                .collect();
            trapezoid(&w, self.grid_step)
        } else {
            C64::new(0.0, 0.0)
        };
        smooth + self.spikes.iter().map(|s| s.weight * s.location.powi(n)).sum::<C64>()
    }

    /// Scale used by the degeneracy test: max|ρ|·(support length) + Σ|spike weights|.
    pub fn magnitude_scale(&self) -> f64 {
        let smooth = if self.values.len() >= 2 {
            let m = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            m * (self.grid_end() - self.grid_start)
        } else {
            0.0
        };
        smooth + self.spikes.iter().map(|s| s.weight.norm()).sum::<f64>()
    }

    pub fn degeneracy_threshold(&self, factor: f64) -> f64 {
        factor * self.magnitude_scale()
    }

    /// Normalized raw moments ⟨f^n⟩, n = 1..=max_order.
    pub fn moments(&self, max_order: usize) -> Result<MomentReport> {
        self.moments_with_threshold(max_order, DEFAULT_DEGENERACY)
    }

    pub fn moments_with_threshold(&self, max_order: usize, factor: f64) -> Result<MomentReport> {
        if max_order < 1 {
            return Err(Error::invalid("max_order must be at least 1"));
        }
        let norm = self.norm();
        let threshold = self.degeneracy_threshold(factor);
        if !(norm.norm() > threshold) {
            return Ok(MomentReport { norm, raw_moments: Vec::new(), variance: None, degenerate: true, threshold });
        }
        let raw_moments: Vec<C64> = (1..=max_order).map(|n| self.raw_integral(n as i32) / norm).collect();
        let variance = if max_order >= 2 {
            Some(raw_moments[1] - raw_moments[0] * raw_moments[0])
        } else {
            let second = self.raw_integral(2) / norm;
            Some(second - raw_moments[0] * raw_moments[0])
        };
        Ok(MomentReport { norm, raw_moments, variance, degenerate: false, threshold })
    }

    /// Splits w = d/∫d into real and imaginary parts (w1, w2), with ∫w1 = 1 and ∫w2 = 0.
    pub fn decompose_complex(&self) -> Result<(HybridDistribution, HybridDistribution)> {
        let norm = self.norm();
        let threshold = self.degeneracy_threshold(DEFAULT_DEGENERACY);
        if !(norm.norm() > threshold) {
            return Err(Error::DegenerateNormalization { norm: norm.norm(), threshold });
        }
        let w = self.scale(norm.inv());
        Ok((w.map(|v| C64::new(v.re, 0.0)), w.map(|v| C64::new(v.im, 0.0))))
    }

    /// True when every smooth sample and spike weight is real and non-negative.
    pub fn is_proper(&self) -> bool {
        let ok = |v: &C64| v.re >= 0.0 && v.im == 0.0;
        self.values.iter().all(ok) && self.spikes.iter().all(|s| ok(&s.weight))
    }

    /// Writes the smooth part as CSV with columns `f,re,im`.
    pub fn write_smooth_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_smooth_csv_named(out, "f")
    }

    /// Smooth part as CSV with a custom abscissa column name.
    pub fn write_smooth_csv_named<W: Write>(&self, out: W, axis: &str) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record([axis, "re", "im"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([self.x(i).to_string(), v.re.to_string(), v.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the spikes as CSV with columns `location,re,im`.
    pub fn write_spikes_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["location", "re", "im"])?;
        for s in &self.spikes {
            w.write_record([s.location.to_string(), s.weight.re.to_string(), s.weight.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the pair of CSV tables written by `write_smooth_csv` / `write_spikes_csv`.
    pub fn read_csv<R1: Read, R2: Read>(smooth: R1, spikes: R2) -> Result<Self> {
        let rows = read_triples(smooth)?;
        let spike_rows = read_triples(spikes)?;
        let spikes = spike_rows.into_iter().map(|(x, re, im)| Spike::new(x, C64::new(re, im))).collect();
        if rows.is_empty() {
            return Self::from_spikes(spikes);
        }
        if rows.len() < 2 {
            return Err(Error::Parse { line: 2, msg: "smooth part needs at least two rows".into() });
        }
        let start = rows[0].0;
        let step = (rows[rows.len() - 1].0 - start) / (rows.len() - 1) as f64;
        for (i, r) in rows.iter().enumerate() {
            if (r.0 - (start + i as f64 * step)).abs() > 1e-9 * step.abs().max(start.abs()).max(1.0) {
                return Err(Error::Parse { line: i + 2, msg: "grid is not uniform".into() });
            }
        }
        Self::new(start, step, rows.into_iter().map(|(_, re, im)| C64::new(re, im)).collect(), spikes)
    }
}

fn read_triples<R: Read>(input: R) -> Result<Vec<(f64, f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 3 {
            return Err(Error::Parse { line, msg: format!("expected 3 columns, found {}", rec.len()) });
        }
        let mut vals = [0.0; 3];
        for (k, field) in rec.iter().enumerate() {
            vals[k] = field
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse { line, msg: format!("column {}: {e}", k + 1) })?;
            if !vals[k].is_finite() {
                return Err(Error::Parse { line, msg: format!("column {} is not finite", k + 1) });
            }
        }
        out.push((vals[0], vals[1], vals[2]));
    }
    Ok(out)
}

/// Normalization and normalized moments of a distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub norm: C64,
    /// ⟨f^n⟩ for n = 1..; empty when `degenerate`.
    pub raw_moments: Vec<C64>,
    pub variance: Option<C64>,
    /// |norm| fell below the threshold: the anomalous weak-value regime.
    pub degenerate: bool,
    pub threshold: f64,
}

impl MomentReport {
    pub fn mean(&self) -> Option<C64> {
        self.raw_moments.first().copied()
    }

    pub fn moment(&self, n: usize) -> Option<C64> {
        n.checked_sub(1).and_then(|i| self.raw_moments.get(i)).copied()
    }
}

/// Outcome of a search for zero-variance parameter values.
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceLocus {
    /// Parameter values where the variance changes sign (possibly none).
    Roots(Vec<f64>),
    /// The variance vanishes throughout the bracket.
    IdenticallyZero,
}

/// Finds ε in `bracket` where Re(⟨f²⟩ − ⟨f⟩²) of `family(ε)` vanishes.
///
/// The bracket is scanned on `scan` sub-intervals and each sign change is refined by
/// bisection to `tol`. Degenerate members (|∫ρ| below threshold) are skipped.
pub fn variance_zero_locus(
    family: impl Fn(f64) -> HybridDistribution,
    bracket: (f64, f64),
    tol: f64,
    scan: usize,
) -> Result<VarianceLocus> {
    let (lo, hi) = bracket;
    if !(hi > lo) || scan < 1 {
        return Err(Error::invalid("bracket must satisfy lo < hi"));
    }
    let variance = |eps: f64| -> Option<(f64, f64)> {
        let d = family(eps);
        let m = d.moments(2).ok()?;
        let v = m.variance?;
        let scale = m.moment(2).map(|s| s.norm()).unwrap_or(0.0).max(1.0);
        Some((v.re, scale))
    };
    let xs: Vec<f64> = (0..=scan).map(|i| lo + (hi - lo) * i as f64 / scan as f64).collect();
    let vals: Vec<Option<(f64, f64)>> = xs.iter().map(|&x| variance(x)).collect();
    let evaluated: Vec<&(f64, f64)> = vals.iter().flatten().collect();
    if !evaluated.is_empty() && evaluated.iter().all(|(v, s)| v.abs() <= 1e-12 * s) {
        return Ok(VarianceLocus::IdenticallyZero);
    }
    let mut roots = Vec::new();
    for i in 0..scan {
        if let (Some((va, _)), Some((vb, _))) = (vals[i], vals[i + 1]) {
            if va == 0.0 {
                roots.push(xs[i]);
            } else if va.signum() != vb.signum() && vb != 0.0 {
                let f = |e: f64| variance(e).map(|v| v.0).unwrap_or(f64::NAN);
                if let Some(r) = bisect(f, xs[i], xs[i + 1], tol) {
                    roots.push(r);
                }
            }
        }
    }
    if let Some((v, _)) = vals[scan] {
        if v == 0.0 {
            roots.push(xs[scan]);
        }
    }
    Ok(VarianceLocus::Roots(roots))
}

/// The sign-alternating family ρ^ε(f) = sin(2πf) + ε on [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct SineFamily {
    pub points: usize,
}

impl SineFamily {
    pub fn new(points: usize) -> Self {
        Self { points }
    }

    pub fn distribution(&self, eps: f64) -> HybridDistribution {
        HybridDistribution::from_fn(0.0, 1.0, self.points, |f| {
            C64::new((2.0 * std::f64::consts::PI * f).sin() + eps, 0.0)
        })
        .expect("valid grid")
    }

    /// ρ^{ε₁} + iρ^{ε₂}.
    pub fn complex_pair(&self, eps1: f64, eps2: f64) -> HybridDistribution {
        HybridDistribution::from_fn(0.0, 1.0, self.points, |f| {
            let s = (2.0 * std::f64::consts::PI * f).sin();
            C64::new(s + eps1, s + eps2)
        })
        .expect("valid grid")
    }

    pub fn norm(eps: f64) -> f64 {
        eps
    }

    pub fn mean(eps: f64) -> f64 {
        0.5 - 1.0 / (2.0 * std::f64::consts::PI * eps)
    }

    pub fn second_moment(eps: f64) -> f64 {
        1.0 / 3.0 - 1.0 / (2.0 * std::f64::consts::PI * eps)
    }

    pub fn variance(eps: f64) -> f64 {
        1.0 / 12.0 - 1.0 / (4.0 * std::f64::consts::PI.powi(2) * eps * eps)
    }

    /// Re⟨f⟩ of ρ^{ε₁} + iρ^{ε₂}.
    pub fn complex_mean_re(eps1: f64, eps2: f64) -> f64 {
        0.5 - (eps1 + eps2) / (2.0 * std::f64::consts::PI * (eps1 * eps1 + eps2 * eps2))
    }
}
