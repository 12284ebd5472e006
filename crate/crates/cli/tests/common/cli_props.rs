//! Scenario-runner invariants over randomized small configs, through the library API.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use serde_json::json;
use sha2::{Digest, Sha256};
use weakval_cli::{experiments, output, scenario};

pub const CASES: u32 = 128;
const SEED: [u8; 32] = *b"weakval scenario runner seed 001";

type Check = fn() -> Result<(), String>;

pub fn all() -> Vec<(&'static str, Check)> {
    vec![("cli_reruns_byte_identical", cli_reruns_byte_identical), ("cli_manifest_checksums", cli_manifest_checksums)]
}

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config { cases: CASES, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &SEED));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn nonzero(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi, any::<bool>()).prop_map(|(x, neg)| if neg { -x } else { x })
}

/// Small, fast scenarios of the cheap kinds with randomized parameters and seeds.
fn scenario_config() -> impl Strategy<Value = serde_json::Value> {
    let seed = 0u64..1_000_000;
    prop_oneof![
        (prop::collection::vec(0.1f64..60.0, 1..4), prop::collection::vec(0.02f64..1.9, 1..4)).prop_map(|(a, e)| {
            json!({"name": "tl", "kind": "two-level", "output_dir": "o", "params": {"alphas": a, "epsilons": e}})
        }),
        (3usize..5, prop::collection::vec(-2.0f64..2.0, 8), 1usize..4).prop_map(|(d, v, w)| {
            let (mut p0, mut p1) = (v[..d].to_vec(), v[4..4 + d].to_vec());
            p0[0] += 3.0;
            p1[0] += 3.0;
            json!({"name": "tb", "kind": "three-box", "output_dir": "o",
                   "params": {"psi0": p0, "psi1": p1, "watch": [w], "slits": [v[..3].iter().map(|x| x + 0.1).collect::<Vec<_>>()]}})
        }),
        (prop::collection::vec(nonzero(0.02, 2.0), 1..4), 101usize..3001).prop_map(|(e, n)| {
            json!({"name": "d", "kind": "dist", "output_dir": "o",
                   "params": {"points": n, "epsilons": e, "pairs": [[e[0], 0.3]], "density_points": 21}})
        }),
        (seed.clone(), 200usize..2000, 0.2f64..3.0).prop_map(|(s, n, a)| {
            json!({"name": "mc", "kind": "classical", "seed": s, "output_dir": "o",
                   "params": {"samples": n, "bins": {"lo": -6, "hi": 3, "count": 30}, "alphas": [a], "scaling": null}})
        }),
        (seed, 2usize..5).prop_map(|(s, d)| {
            json!({"name": "np", "kind": "no-postselect", "seed": s, "output_dir": "o",
                   "params": {"random_dim": d, "alphas": [10.0]}})
        }),
    ]
}

fn load(cfg: &serde_json::Value, dir: &Path) -> Result<scenario::Scenario, TestCaseError> {
    scenario::parse(&cfg.to_string(), dir, None).map_err(|e| TestCaseError::fail(format!("{cfg}: {e}")))
}

fn fail(e: impl std::fmt::Display) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

/// Re-running a scenario yields identical artifacts and an identical manifest.
pub fn cli_reruns_byte_identical() -> Result<(), String> {
    run(scenario_config(), |cfg| {
        let s = load(&cfg, Path::new("."))?;
        let (a, b) = (experiments::run(&s).map_err(fail)?, experiments::run(&s).map_err(fail)?);
        prop_assert_eq!(&a.artifacts, &b.artifacts);
        let (ma, mb) = (output::manifest(&s, &a), output::manifest(&s, &b));
        prop_assert_eq!(serde_json::to_string(&ma).map_err(fail)?, serde_json::to_string(&mb).map_err(fail)?);
        Ok(())
    })
}

/// Every written file appears in the manifest with its SHA-256 and size, and nothing else does.
pub fn cli_manifest_checksums() -> Result<(), String> {
    run(scenario_config(), |cfg| {
        let tmp = tempfile::TempDir::new().map_err(fail)?;
        let s = load(&cfg, tmp.path())?;
        let outcome = experiments::run(&s).map_err(fail)?;
        output::write(&s.output_dir, &s, &outcome).map_err(fail)?;
        let manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(s.output_dir.join(output::MANIFEST)).map_err(fail)?).map_err(fail)?;
        let mut on_disk = BTreeMap::new();
        for e in fs::read_dir(&s.output_dir).map_err(fail)? {
            let e = e.map_err(fail)?;
            let name = e.file_name().to_string_lossy().into_owned();
            if name != output::MANIFEST {
                on_disk.insert(name, fs::read(e.path()).map_err(fail)?);
            }
        }
        let listed = manifest["outputs"].as_array().ok_or_else(|| fail("outputs missing"))?;
        prop_assert_eq!(listed.len(), on_disk.len());
        for entry in listed {
            let file = entry["file"].as_str().unwrap_or_default();
            let bytes = on_disk.get(file).ok_or_else(|| fail(format!("{file} listed but not written")))?;
            let digest = hex::encode(Sha256::digest(bytes));
            prop_assert_eq!(entry["sha256"].as_str(), Some(digest.as_str()));
            prop_assert_eq!(entry["bytes"].as_u64(), Some(bytes.len() as u64));
        }
        prop_assert_eq!(&manifest["seed"], &json!(s.seed));
        Ok(())
    })
}
