use std::path::{Path, PathBuf};
use std::process::Command;

use blockmf::verify::Level;
use blockmf_cli::{cmd_fixed_points, cmd_integrate, cmd_simulate, cmd_verify, cmd_verify_with, SimulateArgs};

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blockmf"))
}

fn args(replicates: usize, seed: u64) -> SimulateArgs {
    SimulateArgs {
        n_scale: 100.0,
        horizon: 10.0,
        samples: 101,
        replicates,
        seed,
        q0: None,
    }
}

#[test]
fn simulate_writes_replicates_and_mean() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_simulate(&model("example.json"), &args(2, 1), dir.path());
    assert_eq!(out.exit_code, 0, "{:?}", out.summary);
    assert_eq!(out.artifacts.len(), 3);
    assert!(out.summary[0].contains("N = 400"));
    let mean = std::fs::read_to_string(dir.path().join("mean.csv")).unwrap();
    assert_eq!(mean.lines().count(), 102);
}

#[test]
fn simulate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = cmd_simulate(&model("example.json"), &args(4, 9), a.path());
    let second = cmd_simulate(&model("example.json"), &args(4, 9), b.path());
    assert_eq!(first.exit_code, 0);
    for (x, y) in first.artifacts.iter().zip(&second.artifacts) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
}

#[test]
fn malformed_model_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(model("example.json")).unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, text.replace("\"beta\": 4", "\"temperature\": 4")).unwrap();
    let out = cmd_simulate(&broken, &args(1, 0), &dir.path().join("o"));
    assert_eq!(out.exit_code, 2);
    assert!(out.summary[0].contains("beta") || out.summary[0].contains("temperature"), "{:?}", out.summary);
}

#[test]
fn invalid_model_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(model("example.json")).unwrap();
    let broken = dir.path().join("one_way.json");
    std::fs::write(&broken, text.replace("[[1, 2], [2, 1]]", "[[1, 2]]")).unwrap();
    assert_eq!(cmd_fixed_points(&broken, 0, 0, dir.path()).exit_code, 2);
}

#[test]
fn integrate_reports_descent() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_integrate(&model("example.json"), "uniform", 10.0, 1e-2, dir.path());
    assert_eq!(out.exit_code, 0, "{:?}", out.summary);
    let report = std::fs::read_to_string(dir.path().join("descent.csv")).unwrap();
    assert_eq!(report.lines().next(), Some("t,F,dFdt,flag"));
    assert!(report.lines().skip(1).all(|l| l.ends_with(",0")));
    let tilted = cmd_integrate(&model("example.json"), "[0.7, 0.3]", 10.0, 1e-2, dir.path());
    assert_eq!(tilted.exit_code, 0, "{:?}", tilted.summary);
}

#[test]
fn integrate_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("example.json");
    assert_eq!(cmd_integrate(&m, "[0.6, 0.6]", 1.0, 1e-2, dir.path()).exit_code, 2);
    assert_eq!(cmd_integrate(&m, "uniform", 1.0, 0.0, dir.path()).exit_code, 2);
    assert_eq!(cmd_integrate(&m, "delta:3", 1.0, 1e-2, dir.path()).exit_code, 2);
}

#[test]
fn fixed_point_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_fixed_points(&model("example.json"), 50, 0, dir.path());
    assert_eq!(out.exit_code, 0);
    assert_eq!(out.summary[0], "3 fixed points: 1 unstable, 2 stable");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fixed_points.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 3);
    assert!(json[0]["F_value"].is_number());

    let free = cmd_fixed_points(&model("free.json"), 50, 0, dir.path());
    assert_eq!(free.summary[0], "1 fixed point: 1 stable");

    let uniform_only = cmd_fixed_points(&model("example.json"), 0, 0, dir.path());
    assert_eq!(uniform_only.summary[0], "1 fixed point: 1 unstable");
}

#[test]
fn verify_passes_on_example_and_reports_balance() {
    let out = cmd_verify(&model("example.json"), Level::Fast, None);
    assert_eq!(out.exit_code, 0, "{}", out.summary.join("\n"));
    let balance = out.summary.iter().find(|l| l.starts_with("finite_system.detailed-balance")).unwrap();
    let residual: f64 = balance.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(residual < 1e-12);
}

#[test]
fn verify_catches_asymmetric_kernel() {
    let out = cmd_verify_with(&model("example.json"), Level::Fast, None, |spec| {
        spec.interaction.set_w_unchecked(0, 1, 2.0);
    });
    assert_eq!(out.exit_code, 1);
    let row = out.summary.iter().find(|l| l.starts_with("energy.exactness")).unwrap();
    assert!(row.contains("FAIL"), "{row}");
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("example.json");
    let status = |c: &mut Command| c.output().unwrap().status.code().unwrap();
    assert_eq!(status(binary().args(["verify", "--level", "fast", "--model"]).arg(&m)), 0);
    assert_eq!(status(binary().args(["verify", "--asymmetric-w", "--model"]).arg(&m)), 1);
    assert_eq!(status(binary().args(["integrate", "--dt", "0", "--model"]).arg(&m).arg("--out").arg(dir.path())), 2);
    assert_eq!(
        status(binary().args(["integrate", "--T", "2", "--q0", "delta:1", "--model"]).arg(&m).arg("--out").arg(dir.path())),
        0
    );
    assert_eq!(status(binary().args(["simulate", "--model"]).arg(&m).args(["--out", "/proc/blockmf"])), 3);
    assert_eq!(status(binary().args(["fixed-points", "--n-starts", "5", "--model"]).arg(&m).arg("--out").arg(dir.path())), 0);
    assert_eq!(status(binary().args(["simulate", "--bogus"])), 2);
}

#[test]
fn binary_output_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m = model("example.json");
    for dir in [a.path(), b.path()] {
        let ok = binary()
            .args(["simulate", "--n-scale", "10", "--replicates", "3", "--seed", "42", "--T", "5", "--samples", "11", "--model"])
            .arg(&m)
            .arg("--out")
            .arg(dir)
            .status()
            .unwrap();
        assert!(ok.success());
    }
    for name in ["replicate_1.csv", "replicate_2.csv", "replicate_3.csv", "mean.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
}
