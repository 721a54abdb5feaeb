use std::path::Path;
use std::process::Command;

use krf_core::flow::{evolve, singularity_monitor, EndStatus, FlowControls};
use krf_core::geometry::{Grid, RadialKahlerState};
use krf_harness::config::{PresetName, Tolerances};
use krf_harness::verdict::{verdict, HypothesisLedger, VerdictInputs};
use krf_harness::{run_scenario, run_sweep, Classification, ScenarioConfig};
use serde_json::Value;

fn config(text: &str) -> Result<ScenarioConfig, String> {
    ScenarioConfig::from_toml(text).map_err(|e| e.to_string())
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn rejects_unknown_keys() {
    let err = config("name = \"a\"\npreset = \"cigar\"\nt_end = 1.0\nbogus = 3\n").unwrap_err();
    assert!(err.contains("bogus"), "{err}");
    let err = config("name = \"a\"\npreset = \"cigar\"\nt_end = 1.0\n[tolerances]\nricci = 1\n").unwrap_err();
    assert!(err.contains("ricci"), "{err}");
}

#[test]
fn rejects_invalid_values() {
    for (body, key) in [
        ("preset = \"cigar\"\nt_end = 0.0", "t_end"),
        ("preset = \"cigar\"\nt_end = -1.0", "t_end"),
        ("preset = \"cigar\"\nt_end = 1.0\nspeed = 3.0", "speed"),
        ("preset = \"cigar\"\nt_end = 1.0\ntaus = [0.0]", "taus"),
        ("preset = \"cigar\"\nt_end = 1.0\n[grid]\nrho_min = -4.0\nrho_max = 4.0\nnodes = 8", "nodes"),
        ("t_end = 1.0", "preset"),
    ] {
        let err = config(&format!("name = \"a\"\n{body}\n")).unwrap_err();
        assert!(err.contains(key), "{key}: {err}");
    }
}

#[test]
fn potential_table_config_runs() {
    let rho: Vec<f64> = (0..129).map(|i| -10.0 + 0.125 * i as f64).collect();
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
    let p: Vec<f64> = rho.iter().map(|r| r.exp()).collect();
    let text = format!(
        "name = \"table\"\nn = 1\nt_end = 0.2\n[potential]\nrho = [{}]\nvalues = [{}]\nfar_field = \"euclidean\"\n",
        list(&rho),
        list(&p)
    );
    let cfg = config(&text).unwrap();
    let out = tempfile::tempdir().unwrap();
    let a = run_scenario(&cfg, out.path()).unwrap();
    assert_eq!((a.summary.n, a.summary.nodes), (1, 129));
    let rm = a.trajectory.diagnostics[0].sup_rm;
    assert!(rm < 1e-3, "{rm}");
    let err = config(&format!("{text}[grid]\nrho_min = 0.0\nrho_max = 1.0\nnodes = 32\n")).unwrap_err();
    assert!(err.contains("grid"), "{err}");
}

#[test]
fn flat_run_is_global_with_all_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::preset("flat", PresetName::FlatC1, 1.0);
    let a = run_scenario(&cfg, out.path()).unwrap();
    assert_eq!(a.summary.verdict.classification, Classification::GlobalWithRicciFlatLimit);
    assert!(a.summary.checks_pass);
    for f in ["manifest.json", "summary.json", "curvature.csv", "potential.csv", "bounds.csv", "gauge.csv", "holomorphic.csv", "entropy.csv"] {
        assert!(a.dir.join(f).is_file(), "{f} missing");
    }
    let s = summary(&a.dir);
    assert_eq!(s["schema_version"], 1);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(a.dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["name"], "flat");
    let bounds = std::fs::read_to_string(a.dir.join("bounds.csv")).unwrap();
    assert!(bounds.starts_with("bound,t_eff,lhs,rhs,tolerance,holds,status"));
    let curv = std::fs::read_to_string(a.dir.join("curvature.csv")).unwrap();
    assert_eq!(curv.lines().count(), a.summary.stored_states + 1);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = ScenarioConfig::preset("bump", PresetName::PositiveBump, 0.5);
    let ra = run_scenario(&cfg, a.path()).unwrap();
    let rb = run_scenario(&cfg, b.path()).unwrap();
    for f in ["summary.json", "curvature.csv", "bounds.csv", "entropy.csv"] {
        assert_eq!(std::fs::read(ra.dir.join(f)).unwrap(), std::fs::read(rb.dir.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn cigar_is_steady_and_gated() {
    let out = tempfile::tempdir().unwrap();
    let a = run_scenario(&ScenarioConfig::preset("cigar", PresetName::Cigar, 1.0), out.path()).unwrap();
    let v = &a.summary.verdict;
    assert_eq!(v.classification, Classification::Inconclusive);
    assert!(v.notes.iter().any(|n| n.contains("steady profile")), "{:?}", v.notes);
    assert!(v.notes.iter().any(|n| n.contains("bernstein not applicable")));
    assert!(v.notes.iter().any(|n| n.contains("inverse-time not applicable")));
    assert!(a.summary.checks_pass);
}

#[test]
fn positive_bump_decays_to_flat() {
    let out = tempfile::tempdir().unwrap();
    let a = run_scenario(&ScenarioConfig::preset("bump", PresetName::PositiveBump, 1.0), out.path()).unwrap();
    assert_eq!(a.summary.verdict.classification, Classification::GlobalWithRicciFlatLimit);
    let d = &a.trajectory.diagnostics;
    assert!(d.last().unwrap().sup_ricci <= 0.1 * d[0].sup_ricci);
}

#[test]
fn shrinking_fixture_reports_blowup_without_ricci_flat_limit() {
    let out = tempfile::tempdir().unwrap();
    let a = run_scenario(&ScenarioConfig::preset("shrink", PresetName::Shrinking, 1.0), out.path()).unwrap();
    let v = &a.summary.verdict;
    assert_eq!(v.classification, Classification::Inconclusive);
    assert!(v.cause.as_deref().unwrap().contains("finite-time blow-up"));
    assert!(v.notes.iter().any(|n| n.contains("synthetic trajectory")));
    let b = a.summary.blowup.as_ref().unwrap();
    assert!(!b.entries.is_empty());
    for e in &b.entries {
        assert!((e.base_rm - 1.0).abs() < 1e-8);
        assert!(e.scalar_transform_error < 1e-12);
    }
    assert!(!b.ricci_decreasing);
    assert!(a.dir.join("blowup.csv").is_file());
}

fn hypotheses() -> HypothesisLedger {
    HypothesisLedger {
        sobolev: None,
        f_bounded: None,
        bisectional_min: None,
        bisectional_nonnegative: None,
        phong_sturm_sum: None,
        phong_sturm_nonnegative: None,
    }
}

#[test]
fn positivity_failure_is_inconclusive() {
    let s = RadialKahlerState::cigar(Grid::new(-8.0, 8.0, 129).unwrap()).unwrap();
    let mut traj = evolve(&s, 0.1, FlowControls::default()).unwrap();
    traj.status = EndStatus::PositivityFailure { time: 0.1, reason: "injected".into() };
    let signal = singularity_monitor(&traj, 2.0);
    let v = verdict(
        VerdictInputs {
            trajectory: &traj,
            bounds: None,
            signal: &signal,
            limit: None,
            residuals: vec![],
            hypotheses: hypotheses(),
        },
        &Tolerances::default(),
    );
    assert_eq!(v.classification, Classification::Inconclusive);
    assert_eq!(v.cause.as_deref(), Some("positivity failure"));
}

#[test]
fn sweep_writes_one_row_per_scenario() {
    let out = tempfile::tempdir().unwrap();
    let cfgs = vec![
        ScenarioConfig::preset("flat", PresetName::FlatC2, 0.5),
        ScenarioConfig::preset("cusp", PresetName::Cusp, 0.5),
    ];
    let rows = run_sweep(&cfgs, out.path()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].name, "flat");
    let csv = std::fs::read_to_string(out.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(run_sweep(&[cfgs[0].clone(), cfgs[0].clone()], out.path()).is_err());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("flat.toml");
    std::fs::write(&good, "name = \"flat\"\npreset = \"flat-c1\"\nt_end = 0.5\n").unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"bad\"\npreset = \"flat-c1\"\nt_end = 0.5\nspeed = 5.0\n").unwrap();
    let bin = env!("CARGO_BIN_EXE_krf");
    let run = |cfg: &Path| {
        Command::new(bin).arg("run").arg(cfg).arg("--out").arg(dir.path().join("out")).output().unwrap()
    };
    let ok = run(&good);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.path().join("out/flat/summary.json").is_file());
    let fail = run(&bad);
    assert!(!fail.status.success());
    assert!(String::from_utf8_lossy(&fail.stderr).contains("speed"));
    let v = Command::new(bin).args(["verify", "--only", "2"]).output().unwrap();
    assert!(v.status.success());
    assert!(String::from_utf8_lossy(&v.stdout).contains("[PASS]  2."));
}
