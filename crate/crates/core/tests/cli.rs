use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_errmodel"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("RUST_LOG", "warn").output().expect("spawn errmodel")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const AD_CONFIG: &str = r#"
seed = 3
feature_kind = "params+resnorm"
response = "state-norm"

[system]
kind = "advection-diffusion"
n_cells = 21

[surrogate]
kind = "pod-galerkin"
rank = 3
pod_grid = [[-2.0, 0.1], [-0.1, 1.0], [-1.05, 0.55]]
skip = 10
reference = "initial-state"

[integrator]
scheme = "crank-nicolson"
dt = 3e-4
n_steps = 100

[coarse_grid]
stride = 10
count = 10

[split]
n_train = 8
n_val = 2
n_test = 6
n_noise_train = 3

[training]
restarts = 2
max_epochs = 50

[[models]]
family = "lstm"
grid = [{ family = "lstm", layers = 1, width = 3, alpha = 1e-3 }]
"#;

fn burgers_config(fine: f64, coarse: f64) -> String {
    format!(
        r#"
seed = 5
feature_kind = "params"
response = "qoi"

[system]
kind = "burgers"
cell_width = {fine:?}

[surrogate]
kind = "coarse-lfm"
cell_width = {coarse:?}

[integrator]
scheme = "implicit-euler"
dt = 0.05
n_steps = 20

[coarse_grid]
stride = 2
count = 10

[split]
n_train = 8
n_val = 2
n_test = 4
n_noise_train = 2

[training]
restarts = 1
max_epochs = 20

[[models]]
family = "ann"
grid = [{{ family = "ann", layers = 1, width = 3, alpha = 1e-3 }}]
"#
    )
}

fn generate(dir: &TempDir, config: &str) -> (PathBuf, Output) {
    let cfg = dir.path().join("campaign.toml");
    std::fs::write(&cfg, config).unwrap();
    let data = dir.path().join("data");
    let out = run(&["generate", "--config", p(&cfg), "--out", p(&data)]);
    (data, out)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn full_workflow_reports_coverage_levels() {
    let dir = TempDir::new().unwrap();
    let (data, g) = generate(&dir, AD_CONFIG);
    assert!(g.status.success(), "{}", stderr(&g));
    assert!(data.join("manifest.json").exists());
    assert!(data.join("instances/instance_0000.csv").exists());

    let ck = dir.path().join("lstm.json");
    let t = run(&["train", "--data", p(&data), "--family", "lstm", "--out", p(&ck)]);
    assert!(t.status.success(), "{}", stderr(&t));

    let eval = dir.path().join("eval");
    let e = run(&["evaluate", "--model", p(&ck), "--data", p(&data), "--out", p(&eval)]);
    assert!(e.status.success(), "{}", stderr(&e));
    let metrics: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(eval.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["fvu"].is_number());
    for kind in ["gaussian", "laplacian", "ar1"] {
        let omega = &metrics["noise"][kind]["omega"];
        for level in ["0.68", "0.95", "0.99"] {
            let w = omega[level].as_f64().unwrap_or_else(|| panic!("missing omega {kind} {level}"));
            assert!((0.0..=1.0).contains(&w));
        }
    }
    assert!(eval.join("histogram.csv").exists());
    assert!(eval.join("predictions").read_dir().unwrap().count() > 0);

    let report = dir.path().join("report");
    let r = run(&["report", "--input", p(&eval), "--out", p(&report)]);
    assert!(r.status.success(), "{}", stderr(&r));
    let csv = std::fs::read_to_string(report.join("report.csv")).unwrap();
    assert!(csv.starts_with("family,feature_kind,train_size,response,fvu\n"));
    assert!(csv.contains("lstm,params+resnorm"));
}

#[test]
fn unknown_family_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let out = run(&["train", "--data", p(dir.path()), "--family", "transformer", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("lstm") && msg.contains("knn"), "{msg}");
}

#[test]
fn feature_kind_mismatch_is_a_compatibility_error() {
    let dir = TempDir::new().unwrap();
    let (data, g) = generate(&dir, AD_CONFIG);
    assert!(g.status.success(), "{}", stderr(&g));
    let ck = dir.path().join("m.json");
    let t = run(&[
        "train",
        "--data",
        p(&data),
        "--family",
        "lstm",
        "--feature-kind",
        "params",
        "--out",
        p(&ck),
    ]);
    assert_eq!(t.status.code(), Some(5), "{}", stderr(&t));
}

#[test]
fn indivisible_cell_width_is_rejected() {
    let dir = TempDir::new().unwrap();
    let (_, g) = generate(&dir, &burgers_config(0.3, 2.0));
    assert_eq!(g.status.code(), Some(2), "{}", stderr(&g));
    assert!(stderr(&g).contains("discretization"), "{}", stderr(&g));
}

#[test]
fn perfect_surrogate_reports_degenerate_fvu() {
    let dir = TempDir::new().unwrap();
    let (data, g) = generate(&dir, &burgers_config(2.0, 2.0));
    assert!(g.status.success(), "{}", stderr(&g));
    let ck = dir.path().join("ann.json");
    let t = run(&["train", "--data", p(&data), "--family", "ann", "--out", p(&ck)]);
    assert!(t.status.success(), "{}", stderr(&t));
    let eval = dir.path().join("eval");
    let e = run(&["evaluate", "--model", p(&ck), "--data", p(&data), "--out", p(&eval)]);
    assert!(e.status.success(), "{}", stderr(&e));
    let metrics: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(eval.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["fvu"].is_null());
    assert!(metrics["degenerate"].is_string());
}

#[test]
fn malformed_metrics_name_the_file() {
    let dir = TempDir::new().unwrap();
    let eval = dir.path().join("broken");
    std::fs::create_dir_all(&eval).unwrap();
    std::fs::write(eval.join("metrics.json"), "{ not json").unwrap();
    let out = run(&["report", "--input", p(&eval), "--out", p(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("metrics.json"), "{}", stderr(&out));
}

#[test]
fn empty_report_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = run(&["report", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}
