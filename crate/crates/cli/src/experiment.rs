//! Experiment presets mirroring the evaluation protocol: synthetic
//! convergence curves, MNIST under salt-and-pepper noise, CBCL completion,
//! the Poisson-corrupted MIT logo, CBCL ReLU rank-10, and the CSF
//! hardness regimes.

use nmd_core::error::{Error, Result};
use nmd_core::io::{load_matrix, save_iteration_log, MatrixFormat};
use nmd_core::mask::{make_mask, rmse_on, split_train_test, ObservationMask};
use nmd_core::matrix::DenseMatrix;
use nmd_core::model::{Loss, ModelSpec, Nonlinearity};
use nmd_core::noise::{add_poisson, add_salt_pepper, normalize_max};
use nmd_core::solver::{run, InitMode, SolverConfig};
use nmd_core::synth::{generate, FactorDist};
use std::fmt::Write as _;
use std::path::PathBuf;

pub struct ExperimentContext {
    pub out_dir: PathBuf,
    pub data_dir: PathBuf,
    pub time_scale: f64,
    pub parallel: usize,
}

impl ExperimentContext {
    fn dataset(&self, name: &str) -> Result<DenseMatrix> {
        let path = self.data_dir.join(name);
        if !path.exists() {
            return Err(Error::Config(format!(
                "dataset {} not found; run scripts/fetch_data.py (or set NMD_DATA_DIR)",
                path.display()
            )));
        }
        load_matrix(&path, MatrixFormat::Csv)
    }

    fn write(&self, name: &str, content: &str) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)?;
        std::fs::write(self.out_dir.join(name), content)?;
        Ok(())
    }
}

/// Missing-dataset errors map to a dedicated exit code.
pub fn is_missing_dataset(err: &Error) -> bool {
    matches!(err, Error::Config(msg) if msg.contains("dataset"))
}

fn minmax_for(loss: Loss) -> Nonlinearity {
    if loss == Loss::Kl {
        Nonlinearity::min_max(0.5, 1.0).unwrap()
    } else {
        Nonlinearity::min_max(0.0, 1.0).unwrap()
    }
}

fn all_specs() -> Vec<ModelSpec> {
    let mut specs = Vec::new();
    for loss in [Loss::Frobenius, Loss::L1, Loss::Kl] {
        for nl in [
            Nonlinearity::Relu,
            Nonlinearity::Csf,
            minmax_for(loss),
            Nonlinearity::Modulus,
        ] {
            specs.push(ModelSpec::new(nl, loss).unwrap());
        }
    }
    specs
}

/// Runs jobs on up to `parallel` threads, keeping input order in the output.
fn run_jobs<T: Send, R: Send>(jobs: Vec<T>, parallel: usize, f: impl Fn(T) -> R + Sync) -> Vec<R> {
    use std::sync::Mutex;
    let work: Mutex<Vec<(usize, T)>> = Mutex::new(jobs.into_iter().enumerate().rev().collect());
    let results: Mutex<Vec<(usize, R)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..parallel.max(1) {
            scope.spawn(|| loop {
                let Some((idx, job)) = work.lock().unwrap().pop() else {
                    break;
                };
                let r = f(job);
                results.lock().unwrap().push((idx, r));
            });
        }
    });
    let mut out = results.into_inner().unwrap();
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

/// Mean objective curves for all 12 models on exact rank-5 synthetic data
/// (100x80, Gaussian factors, 10 seeds, 1000 iterations).
pub fn synthetic_convergence(ctx: &ExperimentContext) -> Result<()> {
    let iters = 1000usize;
    let results = run_jobs(all_specs(), ctx.parallel, |spec| {
        let mut mean_curve = vec![0.0f64; iters];
        for seed in 0..10u64 {
            let inst = generate(
                &spec.nonlinearity,
                100,
                80,
                5,
                FactorDist::Gaussian,
                1000 + seed,
            );
            let mut cfg = SolverConfig::new(5);
            cfg.max_iter = iters;
            cfg.seed = seed;
            let out = run(&spec, &inst.x, &cfg, None, None)
                .unwrap_or_else(|e| panic!("{} failed: {e}", spec.name()));
            for (k, r) in out.records.iter().enumerate() {
                mean_curve[k] += r.objective / 10.0;
            }
        }
        (spec.name(), mean_curve)
    });

    let mut summary = String::from("model,final_mean_objective\n");
    for (name, curve) in &results {
        let mut csv = String::from("iter,mean_objective\n");
        for (k, v) in curve.iter().enumerate() {
            let _ = writeln!(csv, "{},{:.9e}", k + 1, v);
        }
        ctx.write(&format!("curve_{}.csv", name.replace('+', "_")), &csv)?;
        let _ = writeln!(summary, "{},{:.9e}", name, curve.last().unwrap());
        println!(
            "{name:12} final mean objective {:.3e}",
            curve.last().unwrap()
        );
    }
    ctx.write("summary.csv", &summary)?;
    Ok(())
}

/// The two CSF regimes from the supplementary study: uniform factors at
/// 100x80 rank 5, and Gaussian factors at 10x10 rank 2; 15 iterations,
/// all three losses.
pub fn csf_hardness(ctx: &ExperimentContext) -> Result<()> {
    let mut summary = String::from("regime,loss,final_mean_objective,min_mean_objective\n");
    for (regime, dist, m, n, r, base) in [
        (
            "uniform",
            FactorDist::Uniform01,
            100usize,
            80usize,
            5usize,
            2000u64,
        ),
        ("gaussian-small", FactorDist::Gaussian, 10, 10, 2, 0),
    ] {
        for loss in [Loss::Frobenius, Loss::L1, Loss::Kl] {
            let spec = ModelSpec::new(Nonlinearity::Csf, loss)?;
            let mut mean_curve = [0.0f64; 15];
            for seed in 0..10u64 {
                let inst = generate(&Nonlinearity::Csf, m, n, r, dist, base + seed);
                let mut cfg = SolverConfig::new(r);
                cfg.max_iter = 15;
                cfg.seed = seed;
                let out = run(&spec, &inst.x, &cfg, None, None)?;
                for (k, rec) in out.records.iter().enumerate() {
                    mean_curve[k] += rec.objective / 10.0;
                }
            }
            let mut csv = String::from("iter,mean_objective\n");
            for (k, v) in mean_curve.iter().enumerate() {
                let _ = writeln!(csv, "{},{:.9e}", k + 1, v);
            }
            ctx.write(&format!("curve_{regime}_{}.csv", loss.name()), &csv)?;
            let min = mean_curve.iter().cloned().fold(f64::INFINITY, f64::min);
            let _ = writeln!(
                summary,
                "{regime},{},{:.9e},{:.9e}",
                loss.name(),
                mean_curve[14],
                min
            );
            println!(
                "csf {regime:14} {:3}: final mean {:.3e}, min {:.3e}",
                loss.name(),
                mean_curve[14],
                min
            );
        }
    }
    ctx.write("summary.csv", &summary)?;
    Ok(())
}

/// MNIST digits under salt-and-pepper noise: ReLU+Frobenius, ReLU+l1 and
/// MinMax+l1 at five noise densities, 30 s per configuration.
pub fn mnist_snp(ctx: &ExperimentContext) -> Result<()> {
    let clean = normalize_max(&ctx.dataset("mnist.csv")?)?;
    let budget = 30.0 * ctx.time_scale;
    let relu = Nonlinearity::Relu;
    let minmax = Nonlinearity::min_max(0.0, 1.0).unwrap();
    let configs = [
        ModelSpec::new(relu, Loss::Frobenius)?,
        ModelSpec::new(relu, Loss::L1)?,
        ModelSpec::new(minmax, Loss::L1)?,
    ];
    let densities = [0.0, 0.05, 0.10, 0.15, 0.20];

    let mut summary = String::from("noise_pct,noisy_vs_gt,relu_fro,relu_l1,minmax_l1\n");
    for (di, &d) in densities.iter().enumerate() {
        let noisy = add_salt_pepper(&clean, d, 100 + di as u64)?;
        let baseline = clean.sub(&noisy)?.frob_norm() / clean.frob_norm();
        let jobs: Vec<ModelSpec> = configs.to_vec();
        let errs = run_jobs(jobs, ctx.parallel, |spec| {
            let mut cfg = SolverConfig::new(32);
            cfg.max_iter = usize::MAX;
            cfg.max_seconds = budget;
            cfg.seed = 1;
            let out = run(&spec, &noisy, &cfg, None, None)
                .unwrap_or_else(|e| panic!("{} failed: {e}", spec.name()));
            save_iteration_log(
                &out.records,
                &ctx.out_dir.join(format!(
                    "log_d{}_{}.csv",
                    (d * 100.0) as u32,
                    spec.name().replace('+', "_")
                )),
            )
            .ok();
            let recon = out
                .prediction()
                .unwrap()
                .map(|v| spec.nonlinearity.apply_scalar(v));
            clean.sub(&recon).unwrap().frob_norm() / clean.frob_norm()
        });
        let _ = writeln!(
            summary,
            "{},{:.5},{:.5},{:.5},{:.5}",
            (d * 100.0) as u32,
            baseline,
            errs[0],
            errs[1],
            errs[2]
        );
        println!(
            "d={:3.0}%: noisy {:.5}, relu+fro {:.5}, relu+l1 {:.5}, minmax+l1 {:.5}",
            d * 100.0,
            baseline,
            errs[0],
            errs[1],
            errs[2]
        );
    }
    ctx.write("summary.csv", &summary)?;
    Ok(())
}

/// CBCL matrix completion with the MinMax model under the Frobenius loss:
/// rank 5, 100 iterations, 80/20 train/test split of the observed entries.
pub fn cbcl_complete(ctx: &ExperimentContext) -> Result<()> {
    let clean = normalize_max(&ctx.dataset("cbcl.csv")?)?;
    let (m, n) = clean.shape();
    let spec = ModelSpec::new(Nonlinearity::min_max(0.0, 1.0).unwrap(), Loss::Frobenius)?;

    let mut summary = String::from("missing_pct,rmse_train,rmse_test\n");
    for (mi, &missing) in [0.0, 0.05, 0.10, 0.20, 0.50, 0.80].iter().enumerate() {
        let observed = 1.0 - missing;
        let omega = if observed >= 1.0 {
            ObservationMask::full(m, n)
        } else {
            make_mask(m, n, observed, 200 + mi as u64)?
        };
        let split = split_train_test(&omega, 0.8, 300 + mi as u64)?;
        let mut x_train = clean.clone();
        for i in 0..m {
            for j in 0..n {
                if !split.train.is_observed(i, j) {
                    x_train.set(i, j, 0.0);
                }
            }
        }
        let mut cfg = SolverConfig::new(5);
        cfg.max_iter = 100;
        cfg.seed = 2;
        let out = run(&spec, &x_train, &cfg, Some(&split.train), None)?;
        let pred = out.prediction()?.map(|v| spec.nonlinearity.apply_scalar(v));
        let rmse_tr = rmse_on(&clean, &pred, &split.train)?;
        let rmse_te = rmse_on(&clean, &pred, &split.test)?;
        let _ = writeln!(
            summary,
            "{},{:.4},{:.4}",
            (missing * 100.0) as u32,
            rmse_tr,
            rmse_te
        );
        println!(
            "missing {:3.0}%: rmse_train {:.4}, rmse_test {:.4}",
            missing * 100.0,
            rmse_tr,
            rmse_te
        );
    }
    ctx.write("summary.csv", &summary)?;
    Ok(())
}

/// Rank-4 factorization of the Poisson-corrupted MIT logo under four
/// model/loss pairs, 10 s per configuration.
pub fn mit_poisson(ctx: &ExperimentContext, poisson_scale: f64) -> Result<()> {
    let clean = ctx.dataset("mit_logo.csv")?;
    let noisy = add_poisson(&clean, poisson_scale, 400)?;
    let budget = 10.0 * ctx.time_scale;

    let minmax = Nonlinearity::min_max(0.5, 1.0).unwrap();
    let configs = [
        ModelSpec::new(minmax, Loss::Kl)?,
        ModelSpec::new(minmax, Loss::Frobenius)?,
        ModelSpec::new(minmax, Loss::L1)?,
        ModelSpec::new(Nonlinearity::Relu, Loss::Kl)?,
    ];

    let mut summary = String::from("model,relative_error_pct\n");
    for spec in &configs {
        let (input, clipped) = spec.clip_to_bounds(&noisy);
        if clipped > 0 {
            eprintln!(
                "note: {} clipped {clipped} noisy entries to the MinMax bounds",
                spec.name()
            );
        }
        let mut cfg = SolverConfig::new(4);
        cfg.max_iter = usize::MAX;
        cfg.max_seconds = budget;
        cfg.seed = 4;
        let out = run(spec, &input, &cfg, None, None)?;
        save_iteration_log(
            &out.records,
            &ctx.out_dir
                .join(format!("log_{}.csv", spec.name().replace('+', "_"))),
        )
        .ok();
        let recon = out.prediction()?.map(|v| spec.nonlinearity.apply_scalar(v));
        let err = clean.sub(&recon)?.frob_norm() / clean.frob_norm();
        let _ = writeln!(summary, "{},{:.2}", spec.name(), err * 100.0);
        println!("{:10} relative error {:.2}%", spec.name(), err * 100.0);
    }
    ctx.write("summary.csv", &summary)?;
    Ok(())
}

/// ReLU+Frobenius rank-10 factorization of CBCL faces from a scaled random
/// initialization, 100 iterations.
pub fn cbcl_relu(ctx: &ExperimentContext) -> Result<()> {
    let clean = normalize_max(&ctx.dataset("cbcl.csv")?)?;
    let spec = ModelSpec::new(Nonlinearity::Relu, Loss::Frobenius)?;
    let mut cfg = SolverConfig::new(10);
    cfg.max_iter = 100;
    cfg.seed = 3;
    cfg.init = InitMode::Random;
    let start = std::time::Instant::now();
    let out = run(&spec, &clean, &cfg, None, None)?;
    let secs = start.elapsed().as_secs_f64();
    save_iteration_log(&out.records, &ctx.out_dir.join("log_relu_fro_rank10.csv"))?;
    let err = out.records.last().map(|r| r.objective).unwrap_or(f64::NAN);
    let mut summary = String::from("final_relative_error,seconds,iterations\n");
    let _ = writeln!(summary, "{:.4},{:.2},{}", err, secs, out.records.len());
    ctx.write("summary.csv", &summary)?;
    println!(
        "final relative error {err:.4} in {secs:.2} s ({} iterations)",
        out.records.len()
    );
    Ok(())
}

pub fn dispatch(preset: &str, ctx: &ExperimentContext, poisson_scale: f64) -> Result<()> {
    std::fs::create_dir_all(&ctx.out_dir)?;
    match preset {
        "synthetic-convergence" => synthetic_convergence(ctx),
        "csf-hardness" => csf_hardness(ctx),
        "mnist-snp" => mnist_snp(ctx),
        "cbcl-complete" => cbcl_complete(ctx),
        "mit-poisson" => mit_poisson(ctx, poisson_scale),
        "cbcl-relu" => cbcl_relu(ctx),
        other => Err(Error::Config(format!(
            "unknown preset '{other}'; expected synthetic-convergence, csf-hardness, mnist-snp, cbcl-complete, mit-poisson, or cbcl-relu"
        ))),
    }
}
