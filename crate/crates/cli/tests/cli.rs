use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chiral_berry_cli::output::sha256_hex;
use chiral_berry_cli::{ResultManifest, VerifyReport};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chiral-berry"));
    c.env_remove("CHIRAL_BERRY_THREADS");
    c
}

struct Run {
    _dir: tempfile::TempDir,
    out: PathBuf,
    output: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().unwrap()
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out.join(name)).unwrap()
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }
}

fn run_with(command: &str, config: &str, extra: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let output = bin()
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    Run { _dir: dir, out, output }
}

fn run(command: &str, config: &str) -> Run {
    run_with(command, config, &[])
}

/// `(theta, phi, re, im)` rows of a grid CSV.
fn grid_rows(text: &str) -> Vec<(f64, f64, f64, f64)> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,phi,value_re,value_im,channel"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

fn vector_rows(text: &str, channel: &str) -> Vec<(f64, f64)> {
    text.lines()
        .skip(1)
        .filter(|l| l.ends_with(&format!(",{channel}")))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

fn assert_manifest_complete(dir: &Path) -> ResultManifest {
    let m = ResultManifest::load(dir).unwrap();
    assert!(m.mismatches(dir).is_empty());
    let mut on_disk: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    let mut listed: Vec<String> = m.files.iter().map(|f| f.path.clone()).collect();
    listed.sort();
    assert_eq!(on_disk, listed);
    m
}

const ISOTROPIC: &str = r#"{"model": {"kind": "isotropic", "q": 1.5}, "field": {"helicity": -1}}"#;

#[test]
fn isotropic_connection_grid() {
    let r = run("connection", ISOTROPIC);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let a_phi = grid_rows(&r.read("connection_a_phi.csv"));
    assert_eq!(a_phi.len(), 32 * 64);
    for (theta, _, re, im) in a_phi {
        assert!((re - (-1.5 * theta.cos())).abs() < 1e-10);
        assert!(im.abs() < 1e-10);
    }
    for (_, _, re, im) in grid_rows(&r.read("connection_a_theta.csv")) {
        assert!(re.abs() < 1e-10 && im.abs() < 1e-10);
    }
    assert_manifest_complete(&r.out);
}

#[test]
fn malformed_config_exits_2_without_output() {
    for bad in ["{not json", r#"{"grid": {"n_theta": 2}}"#, r#"{"model": {"kind": "isotropic"}}"#] {
        let r = run("curvature", bad);
        assert_eq!(r.code(), 2, "{bad}");
        assert!(!r.out.exists());
        assert!(!r.stderr().is_empty());
    }
    let missing = bin().args(["phase", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let usage = bin().args(["phase"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn numeric_preconditions_exit_3() {
    let under = run("verify", r#"{"quadrature": {"degree": 3}}"#);
    assert_eq!(under.code(), 3);
    assert!(under.stderr().contains("quadrature"));
    assert!(!under.out.exists());

    let pole = run("phase", r#"{"phase": {"latitudes": [0.0001]}}"#);
    assert_eq!(pole.code(), 3);

    let open = run("phase", r#"{"phase": {"path": [[1.0, 0.0], [1.2, 0.5]]}}"#);
    assert_eq!(open.code(), 3);

    let skew = run("curvature", r#"{"model": {"kind": "chiral_demo", "transform": {"matrix": [[1, 0.1, 0], [0, 1, 0], [0, 0, 1]]}}}"#);
    assert_eq!(skew.code(), 3);

    let allowed = run("curvature", r#"{"quadrature": {"degree": 3, "allow_underresolved": true}}"#);
    assert_eq!(allowed.code(), 0);
}

#[test]
fn rerun_is_byte_identical_across_thread_counts() {
    let config = r#"{"model": {"kind": "random", "l_max": 3}, "grid": {"n_theta": 12, "n_phi": 16}, "seed": 9}"#;
    for command in ["connection", "curvature", "phase", "pumpprobe"] {
        let a = run_with(command, config, &["--threads", "1"]);
        let b = run_with(command, config, &["--threads", "4"]);
        assert_eq!(a.code(), 0);
        assert_eq!(b.code(), 0);
        let (ma, mb) = (assert_manifest_complete(&a.out), assert_manifest_complete(&b.out));
        assert_eq!(ma.files, mb.files, "{command}");
        assert_eq!(ma.run_id, mb.run_id);
        assert_eq!(ma.config_hash, mb.config_hash);
        for f in &ma.files {
            assert_eq!(fs::read(a.out.join(&f.path)).unwrap(), fs::read(b.out.join(&f.path)).unwrap());
        }
    }

    let other_seed = run_with("curvature", config, &["--seed", "10"]);
    let base = run("curvature", config);
    assert_ne!(other_seed.read("curvature_tensor.csv"), base.read("curvature_tensor.csv"));
}

#[test]
fn threads_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, "{}").unwrap();
    let out = bin()
        .env("CHIRAL_BERRY_THREADS", "2")
        .arg("connection")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let zero = run_with("connection", "{}", &["--threads", "0"]);
    assert_eq!(zero.code(), 2);
}

#[test]
fn curvature_outputs() {
    let demo = run("curvature", "{}");
    assert_eq!(demo.code(), 0);
    let vectors = demo.read("curvature_vectors.csv");
    for channel in ["antisym", "propensity"] {
        let v = vector_rows(&vectors, channel);
        for ((re, im), expected) in v.iter().zip([0.0, 0.0, -2.0]) {
            assert!((re - expected).abs() < 1e-12 && im.abs() < 1e-12, "{channel}");
        }
    }
    let parts: Vec<_> = ["density_xi.csv", "density_zeta.csv", "density_chi.csv"]
        .iter()
        .map(|f| grid_rows(&demo.read(f)))
        .collect();
    let total = grid_rows(&demo.read("density_total.csv"));
    for (k, t) in total.iter().enumerate() {
        let re: f64 = parts.iter().map(|p| p[k].2).sum();
        let im: f64 = parts.iter().map(|p| p[k].3).sum();
        assert_eq!((parts[0][k].0, parts[0][k].1), (t.0, t.1));
        assert!((re - t.2).abs() < 1e-10 && (im - t.3).abs() < 1e-10);
    }
    let tensor = demo.read("curvature_tensor.csv");
    assert!(tensor.starts_with("row,col,value_re,value_im,channel\n"));
    assert_eq!(tensor.lines().count(), 1 + 18);

    let zero = run("curvature", r#"{"model": {"kind": "zero", "l_max": 2}}"#);
    assert_eq!(zero.code(), 0);
    for f in ["density_xi.csv", "density_zeta.csv", "density_chi.csv", "density_total.csv"] {
        assert!(grid_rows(&zero.read(f)).iter().all(|r| r.2 == 0.0 && r.3 == 0.0));
    }
}

#[test]
fn phase_outputs() {
    let r = run(
        "phase",
        r#"{"model": {"kind": "isotropic", "q": 1},
            "phase": {"latitudes": [{"value": 60, "unit": "deg"}], "sweep": 4,
                      "path": [[1.0, 2.0], [1.0, 2.0]],
                      "annulus": {"theta1": {"value": 45, "unit": "deg"}, "theta2": {"value": 90, "unit": "deg"}}}}"#,
    );
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let phase = r.read("phase.csv");
    let mut lines = phase.lines();
    assert_eq!(lines.next(), Some("loop,theta0,sigma,segments,raw,principal,imaginary,analytic"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    let raw: f64 = rows[0][4].parse().unwrap();
    assert!((raw - PI).abs() < 1e-10);
    for row in &rows[..5] {
        let (raw, analytic): (f64, f64) = (row[4].parse().unwrap(), row[7].parse().unwrap());
        assert!((raw - analytic).abs() < 1e-10);
    }
    assert_eq!(rows[5][0], "path");
    assert_eq!(rows[5][4].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[5][7], "");

    let stokes = r.read("stokes.csv");
    let residual: f64 = stokes.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(residual < 1e-6);
}

#[test]
fn pumpprobe_outputs() {
    let zero = run("pumpprobe", r#"{"field": {"d": [0, 0, 0]}}"#);
    assert_eq!(zero.code(), 0);
    for channel in ["a_e", "a_eps", "omega_e", "omega_eps", "cross_vector"] {
        assert!(vector_rows(&zero.read("pumpprobe_vectors.csv"), channel).iter().all(|v| *v == (0.0, 0.0)));
    }
    for f in ["pumpprobe_a_theta_e.csv", "pumpprobe_a_phi_eps.csv", "pumpprobe_density_total.csv"] {
        assert!(grid_rows(&zero.read(f)).iter().all(|r| r.2 == 0.0 && r.3 == 0.0));
    }

    let demo = run("pumpprobe", r#"{"field": {"d": [0.2, 0.5, 1.0], "alpha": 0.4}}"#);
    let report: serde_json::Value = serde_json::from_str(&demo.read("pumpprobe_report.json")).unwrap();
    assert!(report["reduction_residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(report["reduction_pass"], true);
    assert!(report["pseudovector"].is_null());

    let mirrored = run("pumpprobe", r#"{"model": {"kind": "chiral_demo", "transform": {"normal": [0, 1, 0]}}, "field": {"d": [0.2, 0.5, 1.0], "alpha": 0.4}}"#);
    let report: serde_json::Value = serde_json::from_str(&mirrored.read("pumpprobe_report.json")).unwrap();
    let pv = &report["pseudovector"];
    assert_eq!(pv["determinant"].as_f64().unwrap().round(), -1.0);
    assert_eq!(pv["pass"], true);
    let before = pv["omega_e_untransformed"][2][0].as_f64().unwrap();
    let after = pv["omega_e"][2][0].as_f64().unwrap();
    assert!(before < -0.1 && (after + before).abs() < 1e-10);
}

#[test]
fn verify_passes_by_default_and_fails_on_injected_antiholomorphy() {
    let ok = run("verify", "{}");
    assert_eq!(ok.code(), 0, "{}", ok.stderr());
    let report: VerifyReport = serde_json::from_str(&ok.read("verify.json")).unwrap();
    assert!(report.passed);
    assert!(report.suites.len() >= 20);
    assert!(report.suites.iter().all(|s| s.pass));
    let m = assert_manifest_complete(&ok.out);
    assert_eq!(m.files[0].sha256, sha256_hex(ok.read("verify.json").as_bytes()));

    let bad = run("verify", r#"{"debug": {"anti_holomorphic": true}}"#);
    assert_eq!(bad.code(), 1);
    let report: VerifyReport = serde_json::from_str(&bad.read("verify.json")).unwrap();
    assert!(!report.passed);
    let failed: Vec<&str> = report.suites.iter().filter(|s| !s.pass).map(|s| s.name.as_str()).collect();
    assert_eq!(failed, vec!["holomorphy"]);
}

#[test]
fn verify_on_other_models() {
    for config in [
        ISOTROPIC,
        r#"{"model": {"kind": "random", "l_max": 4}, "seed": 3}"#,
        r#"{"model": {"kind": "zero", "l_max": 1}}"#,
        r#"{"model": {"kind": "chiral_demo", "transform": {"axis": [1, 1, 0], "angle": 0.7, "invert": true}}}"#,
    ] {
        let r = run("verify", config);
        assert_eq!(r.code(), 0, "{config}: {}", r.read("verify.json"));
    }
}

#[test]
fn shipped_configs_run() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        for command in ["curvature", "phase", "pumpprobe"] {
            let r = run(command, &text);
            assert_eq!(r.code(), 0, "{} {command}: {}", path.display(), r.stderr());
        }
        seen += 1;
    }
    assert!(seen >= 5);
}
