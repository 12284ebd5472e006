//! Scenario files: `{name, kind, seed, output_dir, params}`. Everything is checked
//! here, before any computation starts.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use weakval::classical::{Bins, ClassicalEnsemble, ClassicalObservable, Switching};
use weakval::lam::Prefactor;
use weakval::quantum::SystemConfig;
use weakval::scattering::{default_smear, TauGrid};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "WEAKVAL_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Dist,
    Classical,
    TwoLevel,
    NoPostselect,
    Traversal,
    PhaseTime,
    Lam,
    ThreeBox,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Dist,
        Kind::Classical,
        Kind::TwoLevel,
        Kind::NoPostselect,
        Kind::Traversal,
        Kind::PhaseTime,
        Kind::Lam,
        Kind::ThreeBox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Dist => "dist",
            Kind::Classical => "classical",
            Kind::TwoLevel => "two-level",
            Kind::NoPostselect => "no-postselect",
            Kind::Traversal => "traversal",
            Kind::PhaseTime => "phase-time",
            Kind::Lam => "lam",
            Kind::ThreeBox => "three-box",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Kind::Dist => "moments of the sine-family improper distributions and the variance root",
            Kind::Classical => "classical meter: reading distributions and the required-N scaling",
            Kind::TwoLevel => "two-level meter reading surface <f>(alpha, epsilon) and weak values",
            Kind::NoPostselect => "averages over an uncontrolled final state and the second-moment prediction",
            Kind::Traversal => "s-wave traversal time, its amplitude distribution and the Larmor clock",
            Kind::PhaseTime => "delay amplitude of a barrier and the phase time against Omega/p",
            Kind::Lam => "differential cross section, local angular momentum and its L-weights",
            Kind::ThreeBox => "grouped-path probabilities, three-box and shutter analysis",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    kind: Kind,
    #[serde(default)]
    seed: u64,
    output_dir: PathBuf,
    #[serde(default)]
    params: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Config,
    Environment,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    pub seed_source: SeedSource,
    /// Resolved against the config file's directory.
    pub output_dir: PathBuf,
    /// Directory of the config file; relative input paths resolve against it.
    pub base_dir: PathBuf,
    pub params: Params,
    /// The config as read, recorded verbatim in the manifest.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone)]
pub enum Params {
    Dist(DistParams),
    Classical(ClassicalParams),
    TwoLevel(TwoLevelParams),
    NoPostselect(NoPostselectParams),
    Traversal(TraversalParams),
    PhaseTime(PhaseTimeParams),
    Lam(LamParams),
    ThreeBox(ThreeBoxParams),
}

/// Loads and validates a scenario. `seed_override` normally comes from `WEAKVAL_SEED`.
pub fn load(path: &Path, seed_override: Option<&str>) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, path.parent().unwrap_or(Path::new(".")), seed_override)
}

pub fn parse(text: &str, base_dir: &Path, seed_override: Option<&str>) -> CliResult<Scenario> {
    let config: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::config(format!("malformed JSON: {e}")))?;
    let raw: RawScenario =
        serde_json::from_value(config.clone()).map_err(|e| CliError::config(format!("scenario: {e}")))?;
    if raw.name.is_empty() || !raw.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
        return Err(CliError::config("name must be non-empty and use only letters, digits, '-', '_' or '.'"));
    }
    if raw.output_dir.as_os_str().is_empty() {
        return Err(CliError::config("output_dir must not be empty"));
    }
    let (seed, seed_source) = match seed_override {
        Some(s) => (
            s.trim().parse().map_err(|_| CliError::config(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?,
            SeedSource::Environment,
        ),
        None => (raw.seed, SeedSource::Config),
    };
    let params = match raw.kind {
        Kind::Dist => Params::Dist(block(raw.params)?),
        Kind::Classical => Params::Classical(block(raw.params)?),
        Kind::TwoLevel => Params::TwoLevel(block(raw.params)?),
        Kind::NoPostselect => Params::NoPostselect(block(raw.params)?),
        Kind::Traversal => Params::Traversal(block(raw.params)?),
        Kind::PhaseTime => Params::PhaseTime(block(raw.params)?),
        Kind::Lam => Params::Lam(block(raw.params)?),
        Kind::ThreeBox => Params::ThreeBox(block(raw.params)?),
    };
    params.validate(base_dir)?;
    let output_dir = if raw.output_dir.is_absolute() { raw.output_dir } else { base_dir.join(raw.output_dir) };
    Ok(Scenario {
        name: raw.name,
        kind: raw.kind,
        seed,
        seed_source,
        output_dir,
        base_dir: base_dir.to_path_buf(),
        params,
        config,
    })
}

fn block<T: DeserializeOwned + Default>(v: serde_json::Value) -> CliResult<T> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v).map_err(|e| CliError::config(format!("params: {e}")))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

fn finite(name: &str, xs: &[f64]) -> CliResult<()> {
    check(xs.iter().all(|x| x.is_finite()), || format!("{name} must be finite"))
}

fn non_empty<T>(name: &str, xs: &[T]) -> CliResult<()> {
    check(!xs.is_empty(), || format!("{name} must not be empty"))
}

fn positive(name: &str, xs: &[f64]) -> CliResult<()> {
    check(xs.iter().all(|&x| x > 0.0 && x.is_finite()), || format!("{name} must be positive and finite"))
}

impl Params {
    fn validate(&self, base_dir: &Path) -> CliResult<()> {
        match self {
            Params::Dist(p) => p.validate(),
            Params::Classical(p) => p.validate(),
            Params::TwoLevel(p) => p.validate(),
            Params::NoPostselect(p) => p.validate(),
            Params::Traversal(p) => p.validate(),
            Params::PhaseTime(p) => p.validate(),
            Params::Lam(p) => p.validate(base_dir),
            Params::ThreeBox(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistParams {
    /// Quadrature points on [0, 1].
    pub points: usize,
    pub epsilons: Vec<f64>,
    /// (ε₁, ε₂) of the complex combination.
    pub pairs: Vec<[f64; 2]>,
    /// Bracket searched for the zero of the variance.
    pub variance_bracket: [f64; 2],
    /// Points per ε in `density.csv`.
    pub density_points: usize,
}

impl Default for DistParams {
    fn default() -> Self {
        Self {
            points: 200_001,
            epsilons: vec![0.05, 0.1, 0.5, 1.5, -0.3],
            pairs: vec![[0.05, 0.05], [0.1, -0.2], [1.0, 0.3], [-0.5, 0.05], [2.0, 2.0]],
            variance_bracket: [0.1, 1.0],
            density_points: 201,
        }
    }
}

impl DistParams {
    fn validate(&self) -> CliResult<()> {
        check(self.points >= 101, || "points must be at least 101".into())?;
        check(self.density_points >= 2, || "density_points must be at least 2".into())?;
        non_empty("epsilons", &self.epsilons)?;
        finite("epsilons", &self.epsilons)?;
        check(self.epsilons.iter().all(|&e| e != 0.0), || "ε = 0 has a vanishing norm".into())?;
        for [a, b] in &self.pairs {
            check(a.is_finite() && b.is_finite() && (a != &0.0 || b != &0.0), || {
                format!("pair ({a}, {b}) must be finite and not both zero")
            })?;
        }
        let [lo, hi] = self.variance_bracket;
        check(lo.is_finite() && hi.is_finite() && hi > lo, || "variance_bracket needs lo < hi".into())?;
        check(lo > 0.0 || hi < 0.0, || "variance_bracket must not contain ε = 0".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalParams {
    pub ensemble: ClassicalEnsemble,
    pub samples: usize,
    pub bins: Bins,
    /// Meter resolutions for `readings.csv`.
    pub alphas: Vec<f64>,
    /// The required-N experiment on a point reading; omitted when null.
    pub scaling: Option<ScalingParams>,
}

impl Default for ClassicalParams {
    fn default() -> Self {
        Self {
            ensemble: ClassicalEnsemble {
                p_mean: 1.2,
                p_std: 0.3,
                x_mean: -2.0,
                x_std: 0.5,
                switching: Switching::Impulsive { t0: 0.5 },
                observable: ClassicalObservable::Position,
            },
            samples: 200_000,
            bins: Bins { lo: -6.0, hi: 3.0, count: 180 },
            alphas: vec![0.5, 1.0, 2.0],
            scaling: Some(ScalingParams::default()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingParams {
    pub alphas: Vec<f64>,
    pub delta: f64,
    pub confidence: f64,
    pub reps: usize,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self { alphas: vec![5.0, 10.0, 20.0, 40.0], delta: 0.05, confidence: 0.95, reps: 100 }
    }
}

impl ClassicalParams {
    fn validate(&self) -> CliResult<()> {
        self.ensemble.validate().map_err(CliError::from)?;
        let b = self.bins;
        check(b.count >= 2 && b.lo.is_finite() && b.hi.is_finite() && b.hi > b.lo, || {
            "bins need count ≥ 2 and lo < hi".into()
        })?;
        check(self.samples >= 100, || "samples must be at least 100".into())?;
        non_empty("alphas", &self.alphas)?;
        positive("alphas", &self.alphas)?;
        if let Some(s) = &self.scaling {
            check(s.alphas.len() >= 2, || "scaling.alphas needs at least two values".into())?;
            positive("scaling.alphas", &s.alphas)?;
            positive("scaling.delta", &[s.delta])?;
            check(s.confidence > 0.0 && s.confidence < 1.0, || "scaling.confidence must lie in (0, 1)".into())?;
            check(s.reps >= 10, || "scaling.reps must be at least 10".into())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoLevelParams {
    pub epsilons: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl Default for TwoLevelParams {
    fn default() -> Self {
        let alphas = (0..40).map(|i| 0.1 * 500f64.powf(i as f64 / 39.0)).collect();
        Self { epsilons: vec![0.05, 0.1, 0.2, 0.3, 0.5], alphas }
    }
}

impl TwoLevelParams {
    fn validate(&self) -> CliResult<()> {
        non_empty("epsilons", &self.epsilons)?;
        non_empty("alphas", &self.alphas)?;
        positive("alphas", &self.alphas)?;
        check(self.epsilons.iter().all(|&e| e > 0.0 && e < 2.0), || {
            "epsilons must lie in (0, 2) so that the transition is allowed".into()
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoPostselectParams {
    /// Explicit system; when absent a random one of `random_dim` levels is drawn from the seed.
    pub system: Option<SystemConfig>,
    pub random_dim: usize,
    pub basis: BasisChoice,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisChoice {
    Standard,
    Random,
}

impl Default for NoPostselectParams {
    fn default() -> Self {
        Self { system: None, random_dim: 3, basis: BasisChoice::Random, alphas: vec![10.0, 20.0] }
    }
}

impl NoPostselectParams {
    fn validate(&self) -> CliResult<()> {
        match &self.system {
            Some(s) => {
                check(s.psi1.is_none(), || "no-postselect systems must not set psi1".into())?;
                s.build().map_err(CliError::from)?;
            }
            None => check((2..=8).contains(&self.random_dim), || "random_dim must be between 2 and 8".into())?,
        }
        positive("alphas", &self.alphas)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraversalParams {
    pub radius: f64,
    pub k: f64,
    /// Ω values of the τ̄ sweep.
    pub omegas: Vec<f64>,
    /// Ω for the amplitude distribution Φ(τ) and the Larmor clock.
    pub phi_omega: f64,
    /// τ-grid in units of R².
    pub tau_grid: TauGrid,
    /// Smearing width in units of R²; defaults to 0.03.
    pub smear: Option<f64>,
    /// Reality and zero-variance checks run on this (k, Ω) grid.
    pub check_k: Vec<f64>,
    pub check_omega: Vec<f64>,
    pub clock_j: f64,
}

impl Default for TraversalParams {
    fn default() -> Self {
        Self {
            radius: 1.0,
            k: 1.0,
            omegas: (0..=120).map(|i| -3.0 + 0.05 * i as f64).collect(),
            phi_omega: 1.0,
            tau_grid: TauGrid { start: -20.0, step: 0.005, points: 1 << 14 },
            smear: None,
            check_k: (0..10).map(|i| 0.5 + 2.5 * i as f64 / 9.0).collect(),
            check_omega: (0..10).map(|i| -3.0 + 6.0 * i as f64 / 9.0).collect(),
            clock_j: 1e4,
        }
    }
}

impl TraversalParams {
    /// Smearing width in absolute units.
    pub fn smear_width(&self) -> f64 {
        self.smear.map_or_else(|| default_smear(self.radius), |s| s * self.radius * self.radius)
    }

    /// The τ-grid in absolute units.
    pub fn absolute_tau_grid(&self) -> TauGrid {
        let r2 = self.radius * self.radius;
        TauGrid { start: self.tau_grid.start * r2, step: self.tau_grid.step * r2, points: self.tau_grid.points }
    }

    fn validate(&self) -> CliResult<()> {
        positive("radius", &[self.radius])?;
        positive("k", &[self.k])?;
        positive("check_k", &self.check_k)?;
        finite("omegas", &self.omegas)?;
        finite("check_omega", &self.check_omega)?;
        finite("phi_omega", &[self.phi_omega])?;
        positive("smear", &[self.smear_width()])?;
        positive("tau_grid.step", &[self.tau_grid.step])?;
        check(self.tau_grid.points >= 64 && self.tau_grid.start.is_finite(), || {
            "tau_grid needs a finite start and at least 64 points".into()
        })?;
        check(self.clock_j >= 1.0 && (2.0 * self.clock_j).fract() == 0.0, || {
            "clock_j must be an integer or half-integer ≥ 1".into()
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseTimeParams {
    pub p: f64,
    /// δ-barrier strength for Φ_p(x).
    pub omega: f64,
    /// Ω/p values of the phase-time sweep.
    pub ratios: Vec<f64>,
    /// x-range written to `phi_x.csv`.
    pub x_window: [f64; 2],
    /// Momentum width of the wavepacket check, as a fraction of p.
    pub sigma_k_fraction: f64,
}

impl Default for PhaseTimeParams {
    fn default() -> Self {
        Self {
            p: 1.0,
            omega: 1.0,
            ratios: (1..=100).map(|i| 0.05 * i as f64).collect(),
            x_window: [-20.0, 2.0],
            sigma_k_fraction: 0.01,
        }
    }
}

impl PhaseTimeParams {
    fn validate(&self) -> CliResult<()> {
        positive("p", &[self.p])?;
        finite("omega", &[self.omega])?;
        non_empty("ratios", &self.ratios)?;
        finite("ratios", &self.ratios)?;
        positive("sigma_k_fraction", &[self.sigma_k_fraction])?;
        check(self.sigma_k_fraction <= 0.2, || "sigma_k_fraction above 0.2 is not a narrow packet".into())?;
        let [a, b] = self.x_window;
        check(a.is_finite() && b.is_finite() && b > a, || "x_window needs lo < hi".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LamParams {
    /// "bundled" or a path to a `J,re,im` CSV or JSON partial-wave file.
    pub source: String,
    pub prefactor: Option<Prefactor>,
    pub theta_points: usize,
    /// Angles in degrees for weight tables; empty means the DCS minimum only.
    pub weights_at: Vec<f64>,
    pub l_max: Option<usize>,
}

impl Default for LamParams {
    fn default() -> Self {
        Self { source: "bundled".into(), prefactor: None, theta_points: 177, weights_at: Vec::new(), l_max: None }
    }
}

impl LamParams {
    pub fn source_path(&self, base_dir: &Path) -> Option<PathBuf> {
        (self.source != "bundled").then(|| base_dir.join(&self.source))
    }

    fn validate(&self, base_dir: &Path) -> CliResult<()> {
        check(self.theta_points >= 2, || "theta_points must be at least 2".into())?;
        let (lo, hi) = (weakval::lam::THETA_MIN.to_degrees(), weakval::lam::THETA_MAX.to_degrees());
        check(self.weights_at.iter().all(|&t| t >= lo && t <= hi), || {
            format!("weights_at angles must lie in [{lo:.1}°, {hi:.1}°]")
        })?;
        if let Some(path) = self.source_path(base_dir) {
            check(path.is_file(), || format!("partial-wave file {} does not exist", path.display()))?;
            weakval::lam::ingest_partial_waves(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThreeBoxParams {
    /// Real components of the prepared and post-selected states (normalized on load).
    pub psi0: Vec<f64>,
    pub psi1: Vec<f64>,
    /// Boxes to watch one at a time, 1-based.
    pub watch: Vec<usize>,
    /// Real path amplitudes for the slit and shutter analysis.
    pub slits: Vec<Vec<f64>>,
    /// Shutter pair, 1-based.
    pub shutter: [usize; 2],
}

impl Default for ThreeBoxParams {
    fn default() -> Self {
        Self {
            psi0: vec![1.0, 1.0, 1.0],
            psi1: vec![1.0, 1.0, -1.0],
            watch: vec![1, 2, 3],
            slits: vec![vec![1.0, 1.0, -1.0], vec![1.0, 1.0, 1.0]],
            shutter: [2, 3],
        }
    }
}

impl ThreeBoxParams {
    fn validate(&self) -> CliResult<()> {
        let d = self.psi0.len();
        check(d >= 2 && self.psi1.len() == d, || "psi0 and psi1 need the same length ≥ 2".into())?;
        finite("psi0", &self.psi0)?;
        finite("psi1", &self.psi1)?;
        check(self.psi0.iter().any(|&x| x != 0.0) && self.psi1.iter().any(|&x| x != 0.0), || {
            "states must be nonzero".into()
        })?;
        check(self.watch.iter().all(|&b| b >= 1 && b <= d), || format!("watched boxes must lie in 1..={d}"))?;
        let [a, b] = self.shutter;
        for s in &self.slits {
            check(s.len() >= 3, || "each slit set needs at least 3 amplitudes".into())?;
            finite("slits", s)?;
            check(s.iter().any(|&x| x != 0.0), || "slit amplitudes must not all vanish".into())?;
            check(a >= 1 && b >= 1 && a != b && a.max(b) <= s.len(), || {
                format!("shutter pair ({a}, {b}) is not two distinct paths among {}", s.len())
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_params() {
        let s = parse(r#"{"name": "x", "kind": "two-level", "output_dir": "out"}"#, Path::new("/tmp"), None).unwrap();
        assert!(matches!(s.params, Params::TwoLevel(_)));
        assert_eq!(s.output_dir, Path::new("/tmp/out"));
        assert_eq!(s.seed_source, SeedSource::Config);
    }

    #[test]
    fn env_seed_overrides_and_must_parse() {
        let text = r#"{"name": "x", "kind": "dist", "seed": 3, "output_dir": "o"}"#;
        assert_eq!(parse(text, Path::new("."), Some("17")).unwrap().seed, 17);
        assert!(matches!(parse(text, Path::new("."), Some("abc")), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        for text in [
            r#"{"name": "x", "kind": "dist", "output_dir": "o", "extra": 1}"#,
            r#"{"name": "x", "kind": "nope", "output_dir": "o"}"#,
            r#"{"name": "x", "kind": "dist", "output_dir": "o", "params": {"epsilons": [0.0]}}"#,
            r#"{"name": "x", "kind": "two-level", "output_dir": "o", "params": {"alphas": [-1]}}"#,
            r#"{"name": "", "kind": "dist", "output_dir": "o"}"#,
        ] {
            assert!(matches!(parse(text, Path::new("."), None), Err(CliError::Config(_))), "{text}");
        }
    }
}
