use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const HEAD: &str = r#"
version = 1
seed = 9

[kernel]
kind = "power"
p = 2

[weight]
kind = "gevrey"
g = 0.5
c_f = 0.9
"#;

const NORMALIZE: &str = r#"
[norm]
s = 0.2
s0 = 0.1
r = 0.05

[normalize]
modes = 3
degree = 4
gamma = 1e-6
rational_radius = 1e-9
"#;

const SIMULATE: &str = r#"
[norm]
s = 1.0
s0 = 0.5
r = 0.1

[simulate]
modes = 4
dt = 0.02
t_end = 2.0
observer_stride = 5
radius = 0.1
gamma = 1e-6
members = 4
"#;

const MEASURE: &str = r#"
[norm]
s = 1.0
s0 = 0.5
r = 1.0

[measure]
modes = 3
d = 2
samples = 400
gammas = [1e-6, 1e-4, 1e-8, 1e-5]
"#;

const TIMEPLAN: &str = r#"
[timeplan]
regime = "UltraPower"
d_grid = [10, 100, 1000]
iota = 2.0
a = 0.05
s = 1.0
weight = 3.0
p = 1
"#;

fn run(dir: &Path, cmd: &str, body: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, format!("{HEAD}{body}")).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nlsnf"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.join("out"))
        .args(extra)
        .env("NLSNF_THREADS", "1")
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn column(csv_text: &str, name: &str) -> Vec<f64> {
    let mut rd = csv::Reader::from_reader(csv_text.as_bytes());
    let idx = rd.headers().unwrap().iter().position(|h| h == name).unwrap();
    rd.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn normalize_reports_exact_support_and_is_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let oa = run(a.path(), "normalize", NORMALIZE, &[]);
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    assert!(run(b.path(), "normalize", NORMALIZE, &[]).status.success());
    let res: serde_json::Value = serde_json::from_str(&read(a.path(), "residuals.json")).unwrap();
    assert_eq!(res["h0_bracket_terms"], 0);
    assert_eq!(res["quartic_vs_k2"], 0.0);
    for f in ["resonant_normal_form.txt", "rational_normal_form.txt", "resonant_steps.json", "residuals.json"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f} differs between runs");
    }
}

#[test]
fn invalid_kernel_kind_exits_with_config_code() {
    let t = TempDir::new().unwrap();
    let cfg = t.path().join("run.toml");
    fs::write(&cfg, format!("{HEAD}{NORMALIZE}").replace("\"power\"", "\"gaussian\"")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nlsnf")).args(["normalize", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gaussian"));
}

#[test]
fn unknown_key_is_refused() {
    let t = TempDir::new().unwrap();
    let out = run(t.path(), "normalize", &NORMALIZE.replace("degree = 4", "degree = 4\ndegre = 4"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_block_is_named() {
    let t = TempDir::new().unwrap();
    let out = run(t.path(), "simulate", NORMALIZE, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[simulate]"));
}

#[test]
fn oversized_radius_exits_with_smallness_code() {
    let t = TempDir::new().unwrap();
    let out = run(t.path(), "normalize", &NORMALIZE.replace("rational_radius = 1e-9", "rational_radius = 1e-3"), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_initial_data_has_zero_bootstrap_column() {
    let t = TempDir::new().unwrap();
    let out = run(t.path(), "simulate", &format!("{SIMULATE}initial = \"zero\"\n"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let d = column(&read(t.path(), "trajectory.csv"), "D_stat");
    assert!(!d.is_empty());
    assert!(d.iter().all(|&x| x == 0.0));
}

#[test]
fn simulate_is_seed_deterministic_and_seed_sensitive() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    assert!(run(a.path(), "simulate", SIMULATE, &[]).status.success());
    assert!(run(b.path(), "simulate", SIMULATE, &[]).status.success());
    assert!(run(c.path(), "simulate", SIMULATE, &["--seed", "10"]).status.success());
    assert_eq!(read(a.path(), "trajectory.csv"), read(b.path(), "trajectory.csv"));
    assert_eq!(read(a.path(), "summary.json"), read(b.path(), "summary.json"));
    assert_ne!(read(a.path(), "trajectory.csv"), read(c.path(), "trajectory.csv"));
}

#[test]
fn halving_dt_doubles_rows() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert!(run(a.path(), "simulate", SIMULATE, &[]).status.success());
    assert!(run(b.path(), "simulate", SIMULATE, &["--dt", "0.01"]).status.success());
    let rows = |d: &Path| column(&read(d, "trajectory.csv"), "time").len() - 1;
    assert_eq!(rows(b.path()), 2 * rows(a.path()));
}

#[test]
fn fraction_column_is_monotone_in_gamma() {
    let t = TempDir::new().unwrap();
    let out = run(t.path(), "measure", MEASURE, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(t.path(), "fractions.csv");
    let mut pairs: Vec<(f64, f64)> = column(&text, "gamma").into_iter().zip(column(&text, "fraction")).collect();
    assert_eq!(pairs.len(), 4);
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1), "{pairs:?}");
}

#[test]
fn timeplan_sweep_has_ratio_column() {
    let t = TempDir::new().unwrap();
    let out = run(t.path(), "timeplan", TIMEPLAN, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(t.path(), "timeplan_ultrapower.csv");
    assert!(text.starts_with("d,r,gamma,kappa,M,logT,ratio"));
    let ratio = column(&text, "ratio");
    assert_eq!(ratio.len(), 3);
    assert!(ratio.iter().all(|r| r.is_finite() && *r > 0.0));
}
