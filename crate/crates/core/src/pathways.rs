//! Interfering versus exclusive alternatives: amplitudes are added within a
//! watched group, probabilities across groups.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{braket, CVector};
use crate::quantum::FiniteSystem;
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathAmplitudeSet {
    pub amplitudes: Vec<C64>,
    pub labels: Vec<String>,
}

impl PathAmplitudeSet {
    pub fn new(amplitudes: Vec<C64>, labels: Vec<String>) -> Result<Self> {
        if amplitudes.len() != labels.len() {
            return Err(Error::invalid(format!("{} amplitudes but {} labels", amplitudes.len(), labels.len())));
        }
        if amplitudes.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::invalid("path amplitudes must be finite"));
        }
        if amplitudes.iter().all(|a| a.norm() == 0.0) {
            return Err(Error::invalid("at least one path amplitude must be nonzero"));
        }
        Ok(Self { amplitudes, labels })
    }

    /// Labels the paths 1..=d.
    pub fn numbered(amplitudes: Vec<C64>) -> Result<Self> {
        let labels = (1..=amplitudes.len()).map(|n| n.to_string()).collect();
        Self::new(amplitudes, labels)
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::numbered(amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// |Σ_n A(n)|², the count with nothing watched.
    pub fn detector_count(&self) -> f64 {
        self.amplitudes.iter().sum::<C64>().norm_sqr()
    }
}

/// A(n) = ⟨Ψ₁|P_n|Ψ₀⟩ for each distinct eigenvalue of the observable. Only
/// constant paths exist when H = 0; otherwise use `quantum::virtual_path_amplitudes`.
pub fn path_amplitudes(sys: &FiniteSystem, psi0: &CVector, psi1: &CVector) -> Result<PathAmplitudeSet> {
    if !sys.is_static() {
        return Err(Error::invalid(
            "path amplitudes in the eigenbasis need H = 0; use quantum::virtual_path_amplitudes for a nonzero Hamiltonian",
        ));
    }
    if psi0.len() != sys.dim() || psi1.len() != sys.dim() {
        return Err(Error::invalid("state dimension does not match the system"));
    }
    let (amps, labels) = sys
        .spectrum()
        .iter()
        .map(|(value, projector)| (braket(psi1, projector, psi0), format!("{value}")))
        .unzip();
    PathAmplitudeSet::new(amps, labels)
}

/// Disjoint groups covering every path index (0-based).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WatchPartition {
    pub groups: Vec<Vec<usize>>,
}

impl WatchPartition {
    pub fn new(groups: Vec<Vec<usize>>, paths: usize) -> Result<Self> {
        let mut seen = vec![false; paths];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::invalid("partition groups must be non-empty"));
            }
            for &n in g {
                if n >= paths {
                    return Err(Error::invalid(format!("path index {n} out of range for {paths} paths")));
                }
                if std::mem::replace(&mut seen[n], true) {
                    return Err(Error::invalid(format!("path index {n} appears in two groups")));
                }
            }
        }
        if let Some(n) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("path index {n} is not covered by the partition")));
        }
        Ok(Self { groups })
    }

    /// Each watched path on its own, the rest as one unresolved group.
    pub fn watch(watched: &[usize], paths: usize) -> Result<Self> {
        let mut groups: Vec<Vec<usize>> = watched.iter().map(|&n| vec![n]).collect();
        let rest: Vec<usize> = (0..paths).filter(|n| !watched.contains(n)).collect();
        if !rest.is_empty() {
            groups.push(rest);
        }
        Self::new(groups, paths)
    }

    /// Groups paths that share a value, as a measurement of a degenerate observable would.
    pub fn by_values(values: &[f64], tol: f64) -> Result<Self> {
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for (n, &v) in values.iter().enumerate() {
            match groups.iter_mut().find(|(u, _)| (u - v).abs() <= tol) {
                Some((_, g)) => g.push(n),
                None => groups.push((v, vec![n])),
            }
        }
        Self::new(groups.into_iter().map(|(_, g)| g).collect(), values.len())
    }

    /// Everything unresolved: a single group.
    pub fn coarsest(paths: usize) -> Self {
        Self { groups: vec![(0..paths).collect()] }
    }

    /// Every path resolved.
    pub fn finest(paths: usize) -> Self {
        Self { groups: (0..paths).map(|n| vec![n]).collect() }
    }
}

/// P(g) = |Σ_{n∈g} A(n)|² / Σ_{g′}|Σ_{n∈g′} A(n)|².
pub fn watched_probabilities(set: &PathAmplitudeSet, partition: &WatchPartition) -> Result<Vec<f64>> {
    let d = set.len();
    if let Some(n) = partition.groups.iter().flatten().find(|&&n| n >= d) {
        return Err(Error::invalid(format!("partition refers to path {n} but only {d} paths exist")));
    }
    let net: Vec<f64> = partition
        .groups
        .iter()
        .map(|g| g.iter().map(|&n| set.amplitudes[n]).sum::<C64>().norm_sqr())
        .collect();
    let total: f64 = net.iter().sum();
    let scale: f64 = set.amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let threshold = 1e-28 * scale;
    if total <= threshold {
        return Err(Error::DegenerateNormalization { norm: total, threshold });
    }
    Ok(net.iter().map(|p| p / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShutterReport {
    pub pair: (usize, usize),
    pub baseline: f64,
    pub after: f64,
    pub unchanged: bool,
    /// Every pair whose removal leaves the detector count unchanged.
    pub invariant_pairs: Vec<(usize, usize)>,
}

fn count_without(set: &PathAmplitudeSet, a: usize, b: usize) -> f64 {
    set.amplitudes
        .iter()
        .enumerate()
        .filter(|(n, _)| *n != a && *n != b)
        .map(|(_, x)| *x)
        .sum::<C64>()
        .norm_sqr()
}

/// Closes the shutters on two paths and compares the detector count.
pub fn shutter_sensitivity(set: &PathAmplitudeSet, pair: (usize, usize)) -> Result<ShutterReport> {
    let d = set.len();
    if d < 3 {
        return Err(Error::invalid(format!("shutter analysis needs at least 3 paths, got {d}")));
    }
    let (a, b) = pair;
    if a >= d || b >= d || a == b {
        return Err(Error::invalid(format!("({a}, {b}) is not a pair of distinct paths among {d}")));
    }
    let baseline = set.detector_count();
    let scale: f64 = set.amplitudes.iter().map(|x| x.norm()).sum::<f64>().powi(2);
    let same = |c: f64| (c - baseline).abs() <= 1e-12 * scale;
    let after = count_without(set, a, b);
    let mut invariant_pairs = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            if same(count_without(set, i, j)) {
                invariant_pairs.push((i, j));
            }
        }
    }
    Ok(ShutterReport { pair, baseline, after, unchanged: same(after), invariant_pairs })
}
