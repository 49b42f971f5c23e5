use std::path::Path;
use std::process::{Command, Output};

use ccphase_cli::{Manifest, Scenario};
use serde_json::json;
use tempfile::TempDir;

fn ccphase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccphase"))
        .args(args)
        .env("OPENBLAS_NUM_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, value: serde_json::Value) -> String {
    let p = dir.join("scenario.json");
    std::fs::write(&p, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Inline phase model so planning skips the flux-pulse simulations.
fn inline_calibration() -> serde_json::Value {
    json!({
        "phase": {
            "slope": [0.22996, 0.060847, 0.017460, 0.106718],
            "offset": [-2.9619, -0.7557, -0.1947, -1.4535],
            "rms": [0.0, 0.0, 0.0, 0.0],
            "durations": [],
            "phases": []
        }
    })
}

#[test]
fn spectrum_writes_atlas_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), json!({"spectrum": {"start": 4.3, "stop": 5.9, "points": 33}}));
    let out = tmp.path().join("run");
    let o = ccphase(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let (header, rows) = read_csv(&out.join("shifts.csv"));
    assert_eq!(header, ["coupler_ghz", "chi_011_ghz", "chi_101_ghz", "chi_110_ghz", "chi_ccp_ghz"]);
    assert_eq!(rows.len(), 33);
    let (header, rows) = read_csv(&out.join("spectrum.csv"));
    assert_eq!(header.len(), 9);
    assert_eq!(rows.len(), 33);

    let m = manifest(&out);
    assert_eq!(m.command, "spectrum");
    assert_eq!(m.status, "ok");
    for f in ["config.json", "spectrum.csv", "shifts.csv", "levels.csv", "events.csv"] {
        assert!(m.files.iter().any(|x| x == f), "{f} missing from manifest");
        assert!(out.join(f).is_file());
    }
    let snap: Scenario = serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(snap.spectrum.points, 33);
}

#[test]
fn zero_coupling_gives_flat_zero_shifts() {
    let tmp = TempDir::new().unwrap();
    let mut sc = Scenario::default();
    for c in &mut sc.device.couplings {
        c.g = 0.0;
    }
    // Crossings are exact and fall between grid points.
    sc.spectrum = ccphase_cli::scenario::SpectrumGrid { start: 4.213, stop: 6.2, points: 301 };
    let cfg = write_config(tmp.path(), serde_json::to_value(&sc).unwrap());
    let out = tmp.path().join("run");
    let o = ccphase(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_csv(&out.join("shifts.csv"));
    for r in rows {
        for v in &r[1..] {
            let x: f64 = v.parse().unwrap();
            assert!(x.abs() < 1e-9, "χ = {x} with no coupling");
        }
    }
}

#[test]
fn existing_directories_are_protected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), json!({"spectrum": {"start": 5.0, "stop": 5.8, "points": 5}}));
    let out = tmp.path().join("run");
    let args = ["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()];
    assert!(ccphase(&args).status.success());
    let again = ccphase(&args);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--overwrite"));

    let mut with_flag = args.to_vec();
    with_flag.push("--overwrite");
    assert!(ccphase(&with_flag).status.success());

    // A directory that is not a previous run is never cleared.
    let foreign = tmp.path().join("foreign");
    std::fs::create_dir(&foreign).unwrap();
    std::fs::write(foreign.join("keep.txt"), "data").unwrap();
    let o = ccphase(&["spectrum", "--config", &cfg, "--out", foreign.to_str().unwrap(), "--overwrite"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(foreign.join("keep.txt").is_file());
}

#[test]
fn empty_sweep_grid_fails_before_simulating() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        json!({"sweep": {"parameter": "gate.target.phi_ccp", "values": []}}),
    );
    let out = tmp.path().join("run");
    let o = ccphase(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
    assert!(!out.exists());
}

#[test]
fn unknown_parameter_path_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        json!({"sweep": {"parameter": "device.modes.0.charm", "values": [1.0]}}),
    );
    let out = tmp.path().join("run");
    let o = ccphase(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("charm"));
}

#[test]
fn plan_with_inline_calibration() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), json!({ "calibration": inline_calibration() }));
    let out = tmp.path().join("run");
    let o = ccphase(&["plan", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["frames"], json!(["III", "IXI", "XXI", "IXX"]));
    let durations: Vec<f64> = serde_json::from_value(plan["durations"].clone()).unwrap();
    assert_eq!(durations.len(), 4);
    assert!(durations.iter().all(|&t| t >= 20.0));
    assert!(!plan["pi_pulses"].as_array().unwrap().is_empty());
}

#[test]
fn identity_gate_is_trivial() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        json!({
            "calibration": inline_calibration(),
            "gate": {"kind": {"type": "ccphase"}, "target": {"phi_011": 0.0, "phi_101": 0.0, "phi_110": 0.0, "phi_ccp": 0.0}}
        }),
    );
    let out = tmp.path().join("run");
    let o = ccphase(&["gate", "--config", &cfg, "--out", out.to_str().unwrap(), "--dump-states"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["fidelity"].as_f64().unwrap() > 0.9999);
    assert_eq!(report["duration"].as_f64().unwrap(), 0.0);
    let (header, rows) = read_csv(&out.join("states.csv"));
    assert_eq!(header, ["input", "basis_label", "re", "im"]);
    assert_eq!(rows.len() % 8, 0);
}

#[test]
fn sweep_records_failed_points_and_continues() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        json!({
            "sweep": {"parameter": "device.modes.1.level_count", "values": [4.0, 1.0], "measure": "shifts"}
        }),
    );
    let out = tmp.path().join("run");
    let o = ccphase(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(&header[..3], ["value", "status", "error"]);
    assert_eq!(rows[0][1], "ok");
    assert_eq!(rows[1][1], "failed");
    let chi_ccp: f64 = rows[0][header.iter().position(|h| h == "chi_ccp_ghz").unwrap()].parse().unwrap();
    assert!(chi_ccp.abs() > 0.01, "χ_CCP at the operation point is tens of MHz");
    let m = manifest(&out);
    assert_eq!(m.status, "partial");
    assert_eq!(m.failures.len(), 1);
}

#[test]
fn dt_flag_sets_the_simulation_rate() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), json!({"spectrum": {"start": 5.0, "stop": 5.8, "points": 3}}));
    let out = tmp.path().join("run");
    let o = ccphase(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap(), "--dt", "20"]);
    assert!(o.status.success());
    let snap: Scenario = serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(snap.sim.sim_rate, 50.0);
}
