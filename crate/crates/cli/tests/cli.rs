//! End-to-end tests of the `nmd` binary: exit codes, output formats,
//! determinism, and manifest reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nmd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nmd"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nmd-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Deterministic exact ReLU instance written as CSV.
fn write_relu_instance(path: &Path, m: usize, n: usize, r: usize) {
    let mut state = 0x853c49e6748fea9bu64;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        // rough normal via sum of uniforms
        let mut acc = 0.0;
        for _ in 0..4 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            acc += (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        }
        acc * 1.7
    };
    let w: Vec<Vec<f64>> = (0..m).map(|_| (0..r).map(|_| next()).collect()).collect();
    let h: Vec<Vec<f64>> = (0..r).map(|_| (0..n).map(|_| next()).collect()).collect();
    let mut out = String::new();
    for i in 0..m {
        let row: Vec<String> = (0..n)
            .map(|j| {
                let v: f64 = (0..r).map(|k| w[i][k] * h[k][j]).sum();
                v.max(0.0).to_string()
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Log content with the wall-clock column removed.
fn log_without_elapsed(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            let kept: Vec<&str> = fields
                .iter()
                .enumerate()
                .filter_map(|(i, f)| (i != 1).then_some(*f))
                .collect();
            kept.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn factorize_exact_instance_reaches_small_objective() {
    let dir = workdir("factorize");
    let input = dir.join("x.csv");
    write_relu_instance(&input, 100, 80, 5);
    let out = nmd()
        .args([
            "factorize",
            "--model",
            "relu",
            "--loss",
            "fro",
            "--rank",
            "5",
        ])
        .arg("--input")
        .arg(&input)
        .args(["--max-iter", "100", "--seed", "3"])
        .arg("--out-dir")
        .arg(dir.join("run"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let value: f64 = text
        .split("final_objective=")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(value < 1e-3, "final objective {value}");
    assert!(text.contains("iters=100"));
    assert!(dir.join("run/w.csv").exists());
    assert!(dir.join("run/h.csv").exists());
    assert!(dir.join("run/manifest.json").exists());
    let log = std::fs::read_to_string(dir.join("run/iterations.csv")).unwrap();
    assert!(log.starts_with("iter,elapsed_s,objective,primal_res,dual_res,rho"));
    assert_eq!(log.lines().count(), 101);
}

#[test]
fn identical_runs_are_deterministic_and_rerunnable() {
    let dir = workdir("determinism");
    let input = dir.join("x.csv");
    write_relu_instance(&input, 25, 20, 3);
    for run in ["a", "b"] {
        let out = nmd()
            .args([
                "factorize",
                "--model",
                "relu",
                "--loss",
                "l1",
                "--rank",
                "3",
            ])
            .arg("--input")
            .arg(&input)
            .args(["--max-iter", "50", "--seed", "11"])
            .arg("--out-dir")
            .arg(dir.join(run))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
    }
    // everything except the wall-clock column is byte-identical
    assert_eq!(
        log_without_elapsed(&dir.join("a/iterations.csv")),
        log_without_elapsed(&dir.join("b/iterations.csv"))
    );
    assert_eq!(
        std::fs::read_to_string(dir.join("a/w.csv")).unwrap(),
        std::fs::read_to_string(dir.join("b/w.csv")).unwrap()
    );

    // rerunning from the manifest reproduces the log as well
    let out = nmd()
        .arg("rerun")
        .arg(dir.join("a/manifest.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        log_without_elapsed(&dir.join("a/iterations.csv")),
        log_without_elapsed(&dir.join("b/iterations.csv"))
    );
}

#[test]
fn minmax_without_bounds_is_a_flag_error() {
    let dir = workdir("bounds");
    let input = dir.join("x.csv");
    write_relu_instance(&input, 10, 8, 2);
    let out = nmd()
        .args([
            "factorize",
            "--model",
            "minmax",
            "--loss",
            "fro",
            "--rank",
            "2",
        ])
        .arg("--input")
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--bounds"), "{}", stderr(&out));
}

#[test]
fn out_of_range_data_is_a_validity_error() {
    let dir = workdir("validity");
    let input = dir.join("x.csv");
    std::fs::write(&input, "0.5,2.5\n0.25,0.75\n").unwrap();
    let out = nmd()
        .args([
            "factorize",
            "--model",
            "minmax",
            "--loss",
            "fro",
            "--rank",
            "1",
        ])
        .args(["--bounds", "0", "1"])
        .arg("--input")
        .arg(&input)
        .arg("--out-dir")
        .arg(dir.join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // the documented clip flag turns the same run into a success
    let out = nmd()
        .args([
            "factorize",
            "--model",
            "minmax",
            "--loss",
            "fro",
            "--rank",
            "1",
        ])
        .args(["--bounds", "0", "1"])
        .arg("--input")
        .arg(&input)
        .args(["--clip-to-bounds", "--max-iter", "10"])
        .arg("--out-dir")
        .arg(dir.join("run2"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("clipped 1"));
}

#[test]
fn complete_reports_rmse_and_disjoint_split() {
    let dir = workdir("complete");
    let input = dir.join("x.csv");
    write_relu_instance(&input, 100, 80, 5);
    // the default ridge factor of 1e-6 floors the fit around 5e-6 relative
    // error; shrink it so the exact-fit instance is recovered to rounding
    let out = nmd()
        .args([
            "complete", "--model", "relu", "--loss", "fro", "--rank", "5",
        ])
        .arg("--input")
        .arg(&input)
        .args([
            "--observed-fraction",
            "1.0",
            "--max-iter",
            "500",
            "--seed",
            "5",
        ])
        .args(["--ridge-factor", "1e-12"])
        .arg("--out-dir")
        .arg(dir.join("run"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let rmse_train: f64 = text
        .split("rmse_train=")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(rmse_train < 1e-6, "rmse_train {rmse_train}");
    assert!(text.contains("rmse_test="));

    let manifest = std::fs::read_to_string(dir.join("run/manifest.json")).unwrap();
    assert!(manifest.contains("\"masks_disjoint\": true"));
}

#[test]
fn complete_requires_a_mask_source() {
    let dir = workdir("nomask");
    let input = dir.join("x.csv");
    write_relu_instance(&input, 10, 8, 2);
    let out = nmd()
        .args([
            "complete", "--model", "relu", "--loss", "fro", "--rank", "2",
        ])
        .arg("--input")
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn prox_check_exit_codes() {
    let out = nmd()
        .args(["prox-check", "--all", "--n", "40", "--seed", "7"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).matches("model=").count(), 12);

    let out = nmd()
        .args(["prox-check", "--model", "relu", "--loss", "fro", "--n", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // identical seeds produce identical reports
    let a = nmd()
        .args([
            "prox-check",
            "--model",
            "csf",
            "--loss",
            "l1",
            "--n",
            "60",
            "--seed",
            "9",
        ])
        .output()
        .unwrap();
    let b = nmd()
        .args([
            "prox-check",
            "--model",
            "csf",
            "--loss",
            "l1",
            "--n",
            "60",
            "--seed",
            "9",
        ])
        .output()
        .unwrap();
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn experiment_exit_codes() {
    let out = nmd()
        .args(["experiment", "no-such-preset"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let dir = workdir("missing-data");
    let out = nmd()
        .args(["experiment", "mnist-snp"])
        .arg("--data-dir")
        .arg(dir.join("nowhere"))
        .arg("--out-dir")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr(&out).contains("fetch_data"), "{}", stderr(&out));
}

#[test]
fn csf_hardness_preset_runs_without_datasets() {
    let dir = workdir("csf-hardness");
    let out = nmd()
        .args(["experiment", "csf-hardness"])
        .arg("--out-dir")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = std::fs::read_to_string(dir.join("out/summary.csv")).unwrap();
    // uniform regime reaches 1e-3 within 15 iterations
    let uniform_fro = summary
        .lines()
        .find(|l| l.starts_with("uniform,fro"))
        .unwrap();
    let min: f64 = uniform_fro.split(',').nth(3).unwrap().parse().unwrap();
    assert!(min <= 1e-3, "uniform regime min {min}");
}
