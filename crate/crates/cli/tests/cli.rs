use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chancert_core::CorrelationTensor;

const BIN: &str = env!("CARGO_BIN_EXE_chancert");

/// A thin fiber with ten guided modes keeps every run fast.
const SMALL_FIBER: &str = r#"
[fiber]
length_m = 2.0
core_radius_m = 5e-6
n_core = 1.444
numerical_aperture = 0.22
alpha = 2.0
center_wavelength_m = 810e-9
bandwidth_m = 3e-9
num_wavelengths = 11
sigma_m = 0.5e-9
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RUST_LOG", "info").output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn small_config(dir: &Path) -> String {
    write_config(
        dir,
        &format!(
            "schema_version = 1\ndims = [3, 5]\nwitnesses = [\"pt\", \"ft_bavaresco\", \"ft_morelli\"]\nmub_m = [2, \"d+1\"]\n\
             [noise]\nkind = \"fixed_p\"\np = 0.9\n{SMALL_FIBER}"
        ),
    )
}

#[test]
fn sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["--config", &config, "--out", out.to_str().unwrap(), "sweep"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("sweep.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("fiber_length_m,d,witness,m,p_used,lhs,certified_n,wall_time_ms\n"));
    // d=3: bavaresco, morelli m=2, m=4, pt; d=5 likewise
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(a.join("manifest.json").exists());
    assert!(a.join("plots/certified_vs_d.svg").exists());
    assert!(a.join("plots/certified_vs_m.svg").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rows"], 8);
    assert_eq!(manifest["config"]["mub_m"][1], "d+1");
}

#[test]
fn timing_and_plot_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("o");
    let o = run(&["--config", &config, "--out", out.to_str().unwrap(), "--no-plots", "--timing", "sweep"]);
    assert!(o.status.success());
    assert!(!out.join("plots").exists());
    let mut reader = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    for record in reader.records() {
        let t: f64 = record.unwrap()[7].parse().unwrap();
        assert!(t > 0.0);
    }
}

#[test]
fn simulate_then_sweep_uses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("o");
    let o = run(&["--config", &config, "--out", out.to_str().unwrap(), "simulate"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("modes: 10"), "{stdout}");
    let cached: Vec<_> = fs::read_dir(out.join("cache")).unwrap().collect();
    assert_eq!(cached.len(), 1);
    let o = run(&["--config", &config, "--out", out.to_str().unwrap(), "--no-plots", "sweep"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("loaded cached MSTM"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "schema_version = 1\ndims = [4]\nwitness = [\"pt\"]\n");
    let o = run(&["--config", &config, "sweep"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("run.toml:3:1"), "{err}");

    let config = write_config(dir.path(), &format!("schema_version = 1\ndims = [40]\n{SMALL_FIBER}"));
    let o = run(&["--config", &config, "sweep"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["--config", "/nonexistent/run.toml", "sweep"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!("schema_version = 1\ndims = [3]\nestimator = \"intensity_fit\"\n[fit]\niters = 50\nlearning_rate = inf\n{SMALL_FIBER}"),
    );
    let o = run(&["--config", &config, "--out", dir.path().join("o").to_str().unwrap(), "sweep"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn certify_external_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    CorrelationTensor::perfect(3, 4).write_csv(fs::File::create(&path).unwrap()).unwrap();
    let o = run(&["certify", "--input", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "d,witness,m,lhs,certified_n");
    // bavaresco, pt, morelli m = 2, 3, 4
    assert_eq!(lines.len(), 6);
    assert!(lines[1..].iter().all(|l| l.ends_with(",3")), "{out}");

    fs::write(&path, "x,a,b,value\n0,0,0,1\n").unwrap();
    let o = run(&["certify", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_check_quick() {
    let o = run(&["oracle-check", "--quick"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.lines().count() >= 10);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}
