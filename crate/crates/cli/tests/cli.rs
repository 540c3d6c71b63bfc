use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn zeno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeno")).args(args).env_remove("ZENO_OUT").output().expect("binary runs")
}

fn files_with(dir: &Path, suffix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    v.sort();
    v
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

#[test]
fn annulus_spectrum_has_twenty_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = zeno(&[
        "spectrum", "--domain", "annulus", "--r1", "1", "--r2", "2", "--lmax", "3", "--nmax", "5", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&files_with(dir.path(), "-spectrum.csv")[0]).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "config_hash,l,n,k,energy");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 20);
    let energies: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(energies.windows(2).all(|w| w[0] <= w[1]));
    // lowest root of the l = 0 cross product for radii 1 and 2
    assert_eq!(rows[0][1], "0");
    assert!((rows[0][3].parse::<f64>().unwrap() - 3.1230309195956922).abs() < 1e-12);
    let envelope: Value = serde_json::from_str(&fs::read_to_string(&files_with(dir.path(), ".json")[0]).unwrap()).unwrap();
    assert_eq!(envelope["config_hash"].as_str().unwrap(), rows[0][0]);
    assert_eq!(envelope["payload"]["levels"].as_array().unwrap().len(), 20);
}

#[test]
fn negative_radius_is_a_validation_error_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let out = zeno(&["spectrum", "--domain", "annulus", "--r1", "-1", "--r2", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["class"], "validation");
    assert_eq!(err["error"]["pointer"], "/domain/r1");
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none(), "nothing written on failure");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"kind": "zeno-run", "domain": {"type": "interval", "x0": 0, "x1": 1}, "params": {"t": 0.1, "steps": 4}}"#,
    )
    .unwrap();
    let out = zeno(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["pointer"], "/params/steps");
    assert!(err["error"]["message"].as_str().unwrap().contains("steps"));
}

#[test]
fn guard_and_numerical_failures_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = zeno(&[
        "reduce", "--family", "annulus-to-circle", "--radius", "1", "--l-set", "0,1", "--ladder", "0.02,0.03,0.04", "--t",
        "0.01", "--step-budget", "10", "--out", d,
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["error"]["class"], "guard");
    // the Cartesian annulus basis is orthonormal only to the raster's accuracy
    let out = zeno(&["short-time", "--domain", "annulus", "--r1", "1", "--r2", "2", "--cells", "48", "--modes", "3", "--out", d]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["class"], "numerical");
}

fn zeno_run(dir: &Path, ladder: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "zeno-run", "--domain", "interval", "--x0", "0", "--x1", "1", "--t", "0.05", "--cells", "64", "--n-ladder", ladder,
        "--out", dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let out = zeno(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn reruns_give_identical_csv_bodies() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    zeno_run(a.path(), "1:32", &[]);
    zeno_run(b.path(), "1:32", &["--jobs", "1"]);
    let (fa, fb) = (files_with(a.path(), ".csv"), files_with(b.path(), ".csv"));
    assert_eq!(fa.len(), 2);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    for line in fs::read_to_string(&fa[0]).unwrap().lines().skip(1) {
        for field in line.split(',').skip(2) {
            let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.len(), 18, "17 digits plus the point: {field}");
        }
    }
}

#[test]
fn config_file_and_zeno_out_are_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{"kind": "spectrum", "domain": {"type": "rectangle", "a": 3.141592653589793, "b": 3.141592653589793},
            "params": {"n_max": 2, "m_max": 2}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("results");
    let out = Command::new(env!("CARGO_BIN_EXE_zeno"))
        .args(["run", cfg.to_str().unwrap(), "--hbar", "1"])
        .env("ZENO_OUT", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&files_with(&out_dir, ".csv")[0]).unwrap();
    let e: Vec<f64> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(e, vec![1.0, 2.5, 2.5, 4.0]);
}

#[test]
fn report_merges_ladders_sorted_by_n() {
    let dir = tempfile::tempdir().unwrap();
    zeno_run(dir.path(), "8,2", &[]);
    zeno_run(dir.path(), "1,4,16", &[]);
    let out = zeno(&["report", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let series = summary["convergence"].as_array().unwrap();
    assert_eq!(series.len(), 1, "same config apart from the ladder");
    let ns: Vec<u64> = series[0]["rows"].as_array().unwrap().iter().map(|r| r["n"].as_u64().unwrap()).collect();
    assert_eq!(ns, vec![1, 2, 4, 8, 16]);
    assert!(summary["warnings"].as_array().unwrap().is_empty());
    assert!(fs::read_to_string(dir.path().join("summary.txt")).unwrap().contains("convergence series"));
}

#[test]
fn report_of_one_envelope_carries_its_payload() {
    let dir = tempfile::tempdir().unwrap();
    zeno_run(dir.path(), "1:4", &[]);
    let env_file = &files_with(dir.path(), ".json")[0];
    let envelope: Value = serde_json::from_str(&fs::read_to_string(env_file).unwrap()).unwrap();
    assert!(zeno(&["report", dir.path().to_str().unwrap()]).status.success());
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let entries = summary["envelopes"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["payload"], envelope["payload"]);
    assert_eq!(entries[0]["config_hash"], envelope["config_hash"]);
}

#[test]
fn mixed_versions_warn_and_still_merge() {
    let dir = tempfile::tempdir().unwrap();
    zeno_run(dir.path(), "1,2", &[]);
    let src = &files_with(dir.path(), ".json")[0];
    let mut v: Value = serde_json::from_str(&fs::read_to_string(src).unwrap()).unwrap();
    v["artifact_version"] = 0.into();
    v["config_hash"] = "0000older".into();
    v["payload"]["report"]["points"] = serde_json::json!([{ "n": 64, "fidelity": 0.5 }]);
    fs::write(dir.path().join("old.json"), serde_json::to_string(&v).unwrap()).unwrap();
    let out = zeno(&["report", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("mixed artifact versions"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let rows = summary["convergence"][0]["rows"].as_array().unwrap();
    let versions: Vec<u64> = rows.iter().map(|r| r["artifact_version"].as_u64().unwrap()).collect();
    assert_eq!(versions, vec![1, 1, 0]);
}

#[test]
fn pgm_mask_spectrum_runs_on_the_raster() {
    let dir = tempfile::tempdir().unwrap();
    // 24 x 24 raster, square interior of 16 x 16 pixels
    let mut pgm = String::from("P2\n24 24\n1\n");
    for y in 0..24 {
        let row: Vec<&str> = (0..24).map(|x| if (4..20).contains(&x) && (4..20).contains(&y) { "1" } else { "0" }).collect();
        pgm.push_str(&row.join(" "));
        pgm.push('\n');
    }
    fs::write(dir.path().join("square.pgm"), pgm).unwrap();
    let cfg = dir.path().join("mask.json");
    fs::write(
        &cfg,
        r#"{"kind": "spectrum", "domain": {"type": "mask", "path": "square.pgm", "origin": [0.0, 0.0], "spacing": 0.0625},
            "params": {"source": "fd", "count": 3}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = zeno(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--dat"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&files_with(&out_dir, ".csv")[0]).unwrap();
    let e: Vec<f64> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    // unit square: E = pi^2 (n^2 + m^2) / 2, the five-point stencil sits a little below
    let exact = std::f64::consts::PI.powi(2);
    assert!(e[0] < exact && e[0] > 0.97 * exact, "{}", e[0]);
    assert!((e[1] - e[2]).abs() < 1e-8 * e[1], "degenerate pair");
    assert_eq!(files_with(&out_dir, ".dat").len(), 1);
}

#[test]
fn algebra_check_is_seeded() {
    let a = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "algebra-check".to_string(),
            "--trials".into(),
            "5".into(),
            "--dim".into(),
            "16".into(),
            "--projector-cells".into(),
            "8192".into(),
            "--projector-ladder".into(),
            "2,4,8".into(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            d.to_str().unwrap().into(),
        ]
    };
    let run = |d: &Path| {
        let out = Command::new(env!("CARGO_BIN_EXE_zeno")).args(args(d)).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(&files_with(d, "-algebra_defects.csv")[0]).unwrap()
    };
    let b = tempfile::tempdir().unwrap();
    let (x, y) = (run(a.path()), run(b.path()));
    assert_eq!(x, y);
    let star: f64 = x.lines().find(|l| l.contains("star_homomorphism")).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(star < 1e-12);
}
