use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fermi-scatter"));
    c.env_remove("FERMI_SCATTER_CACHE");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn born_elastic_sidecar_scales_with_the_scattering_length() {
    let want = 4.0 * PI * (1.0 - (-4.0f64).exp());
    for a in [1.0, 0.5, 2.0] {
        let dir = tempfile::tempdir().unwrap();
        let a_str = a.to_string();
        let o = run(&["born", "--energy", "1", "--omega", "1", "--scattering-length", &a_str], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let side = json_file(&dir.path().join("born.json"));
        assert!(rel(side["sigma_total"].as_f64().unwrap(), want * a * a) <= 1e-8);
        assert!(rel(side["provenance"]["scattering_length"].as_f64().unwrap(), a) <= 1e-14);
        let csv = std::fs::read_to_string(dir.path().join("born.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("theta,phi,dsigma_domega"));
        let forward: f64 = lines.next().unwrap().split(',').nth(2).unwrap().parse().unwrap();
        assert!(rel(forward, 4.0 * a * a) <= 1e-14);
    }
}

#[test]
fn born_kinds_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# test config\nenergy = 2.5\nomega = 1\nalpha = 0.1\nangular_order = 8\n").unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let o = run(&["born", "--config", cfg_s, "--kind", "spectrum", "--theta", "0.3"], dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("born.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
    assert!(csv.starts_with("shell,dsigma_domega"));

    let o = run(&["born", "--config", cfg_s, "--kind", "state", "--n-out", "1,0,1"], dir.path());
    assert!(o.status.success());
    let side = json_file(&dir.path().join("born.json"));
    assert_eq!(side["formula"], "state");
    assert_eq!(side["provenance"]["alpha"], 0.1);

    // flags override the file
    let o = run(&["born", "--config", cfg_s, "--energy", "0.5", "--kind", "shell", "--shell", "0"], dir.path());
    assert!(o.status.success());
    assert_eq!(json_file(&dir.path().join("born.json"))["provenance"]["energy"], 0.5);
}

#[test]
fn closed_channel_is_a_runtime_error_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["born", "--energy", "1.3", "--kind", "shell", "--shell", "3"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"]["kind"], "closed_channel");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check", "--check", "bogus"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    assert_eq!(run(&["born", "--omega", "-1"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["solve", "not-a-channel"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["born", "--alpha", "1", "--scattering-length", "1"], dir.path()).status.code(), Some(2));
}

#[test]
fn help_documents_config_keys() {
    let o = bin().arg("--help").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for key in ["omega", "threshold_window", "angular_order", "FERMI_SCATTER_CACHE", "Exit status"] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn agmon_check_passes_and_reports_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check", "--check", "agmon"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1);
    let r: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(r["check"], "agmon");
    assert_eq!(r["status"], "pass");
}

#[test]
fn quick_check_suite_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = run(&["check", "--check", "all", "--quick"], dir.path());
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
    assert!(elapsed < 60.0, "{elapsed}");
}

#[test]
fn solve_uses_the_cache_from_the_environment() {
    let out = tempfile::tempdir().unwrap();
    let cache = tempfile::tempdir().unwrap();
    let args = ["solve", "--cutoff", "2", "0,0,0>0,0,0@0.5,0", "0,0,0>0,0,1@1.0,0.5"];
    let first = bin().args(args).arg("--out").arg(out.path()).env("FERMI_SCATTER_CACHE", cache.path()).output().unwrap();
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let bytes1 = std::fs::read(out.path().join("solve.json")).unwrap();
    let entries = std::fs::read_dir(cache.path()).unwrap().count();
    assert!(entries >= 2);

    let second = bin()
        .args(args)
        .arg("--out")
        .arg(out.path())
        .env("FERMI_SCATTER_CACHE", cache.path())
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    assert!(second.status.success());
    assert_eq!(std::fs::read(out.path().join("solve.json")).unwrap(), bytes1);
    assert!(String::from_utf8_lossy(&second.stderr).contains("cache hit"));

    let doc: serde_json::Value = serde_json::from_slice(&bytes1).unwrap();
    let chans = doc["channels"].as_array().unwrap();
    assert_eq!(chans.len(), 2);
    for c in chans {
        assert!(c["f_general"].is_array() && c["f_born"].is_array());
    }

    let inspect = bin().args(["cache", "inspect"]).env("FERMI_SCATTER_CACHE", cache.path()).output().unwrap();
    assert!(inspect.status.success());
    assert_eq!(String::from_utf8(inspect.stdout).unwrap().lines().count(), entries);
    let clear = bin().args(["cache", "clear"]).env("FERMI_SCATTER_CACHE", cache.path()).output().unwrap();
    assert!(clear.status.success());
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 0);
}

#[test]
fn scan_writes_csv_and_annotated_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scan", "--cutoff", "1", "--alpha", "40", "--mu-min", "0.5", "--mu-max", "1.5", "--steps", "5"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert!(csv.starts_with("mu,smin"));
    assert_eq!(csv.lines().count(), 1 + 4);
    let side = json_file(&dir.path().join("scan.json"));
    assert_eq!(side["thresholds"], serde_json::json!([1.0]));
    assert!(side["min_smin"].as_f64().unwrap() >= 20.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let args = ["born", "--kind", "shell", "--shell", "1", "--energy", "2.2"];
    assert!(run(&args, d1.path()).status.success());
    assert!(run(&args, d2.path()).status.success());
    for f in ["born.csv", "born.json"] {
        assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap(), "{f}");
    }
}
