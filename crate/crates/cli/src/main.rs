//! Command-line front end for the nonlinear matrix decomposition solver.
//!
//! Exit codes: 0 success, 1 prox-check gap violation, 2 invalid flags,
//! 3 data/model validity violation, 4 divergence, 5 missing dataset.

mod experiment;
mod manifest;
mod runner;

use clap::{Args, Parser, Subcommand, ValueEnum};
use experiment::ExperimentContext;
use manifest::RunManifest;
use nmd_core::error::Error;
use nmd_core::model::{Loss, ModelSpec, Nonlinearity};
use nmd_core::oracle::{check_prox_batch, GAP_THRESHOLD};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nmd",
    about = "Nonlinear matrix decomposition X ~ f(WH) by a global ADMM scheme",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorize a data matrix.
    Factorize(FactorizeArgs),
    /// Matrix completion with a train/test split of the observed entries.
    Complete(CompleteArgs),
    /// Compare the closed-form scalar solvers against the brute-force
    /// oracle on random subproblems.
    ProxCheck(ProxCheckArgs),
    /// Run a named experiment preset.
    Experiment(ExperimentArgs),
    /// Re-run a factorize/complete invocation from its manifest.
    Rerun {
        /// Path to a manifest.json written by a previous run.
        manifest: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Relu,
    Csf,
    Minmax,
    Modulus,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossArg {
    Fro,
    L1,
    Kl,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Svd,
    Random,
}

#[derive(Args, Clone)]
struct SolveArgs {
    /// Nonlinearity.
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Loss function.
    #[arg(long, value_enum)]
    loss: LossArg,
    /// Factorization rank.
    #[arg(long)]
    rank: usize,
    /// Input matrix (.csv, .mtx/.mm, or .pgm).
    #[arg(long)]
    input: PathBuf,
    /// MinMax bounds, required for --model minmax.
    #[arg(long, num_args = 2, value_names = ["P", "Q"])]
    bounds: Option<Vec<f64>>,
    /// Initial penalty parameter.
    #[arg(long, default_value_t = 1.0)]
    rho0: f64,
    /// Coefficient of the squared factor norms in the ridge terms.
    #[arg(long, default_value_t = 1e-6)]
    ridge_factor: f64,
    /// Disable the adaptive penalty schedule.
    #[arg(long)]
    no_adaptive_rho: bool,
    /// Maximum number of iterations.
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Wall-clock budget in seconds (unlimited if omitted).
    #[arg(long)]
    max_seconds: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Factor initialization.
    #[arg(long, value_enum, default_value_t = InitArg::Svd)]
    init: InitArg,
    /// Iteration log path (default `<out-dir>/iterations.csv`).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Output path for W (default `<out-dir>/w.csv`).
    #[arg(long)]
    out_w: Option<PathBuf>,
    /// Output path for H (default `<out-dir>/h.csv`).
    #[arg(long)]
    out_h: Option<PathBuf>,
    /// Directory for logs, factors and the manifest.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Clip out-of-range data to the MinMax bounds instead of rejecting it.
    #[arg(long)]
    clip_to_bounds: bool,
}

#[derive(Args)]
struct FactorizeArgs {
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct CompleteArgs {
    #[command(flatten)]
    solve: SolveArgs,
    /// Mask file (CSV of 0/1 or 1-based "i j" coordinate lines).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Fraction of entries to observe (mask drawn with --seed).
    #[arg(long)]
    observed_fraction: Option<f64>,
    /// Fraction of observed entries used for training.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
}

#[derive(Args)]
struct ProxCheckArgs {
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    /// Check all 12 model combinations.
    #[arg(long)]
    all: bool,
    /// Subproblems per combination.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write the per-instance report to a CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Preset: synthetic-convergence, csf-hardness, mnist-snp,
    /// cbcl-complete, mit-poisson, or cbcl-relu.
    preset: String,
    /// Output directory (default `runs/<preset>`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Dataset directory (default $NMD_DATA_DIR or ./data).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Scales the per-configuration time budgets.
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
    /// Run independent configurations on up to N threads.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Photon scale for the Poisson noise preset.
    #[arg(long, default_value_t = 255.0)]
    poisson_scale: f64,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Divergence { .. } => 4,
        _ => 3,
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn model_spec_from_args(
    model: ModelArg,
    loss: LossArg,
    bounds: &Option<Vec<f64>>,
) -> Result<ModelSpec, String> {
    let loss = match loss {
        LossArg::Fro => Loss::Frobenius,
        LossArg::L1 => Loss::L1,
        LossArg::Kl => Loss::Kl,
    };
    let nl = match model {
        ModelArg::Relu => Nonlinearity::Relu,
        ModelArg::Csf => Nonlinearity::Csf,
        ModelArg::Modulus => Nonlinearity::Modulus,
        ModelArg::Minmax => {
            let Some(b) = bounds else {
                return Err("--model minmax requires --bounds P Q".to_string());
            };
            Nonlinearity::min_max(b[0], b[1]).map_err(|e| e.to_string())?
        }
    };
    ModelSpec::new(nl, loss).map_err(|e| e.to_string())
}

fn build_manifest(command: &str, args: &SolveArgs) -> Result<RunManifest, String> {
    // surface model/bounds problems as flag errors before anything runs
    let spec = model_spec_from_args(args.model, args.loss, &args.bounds)?;
    let out_dir = &args.out_dir;
    Ok(RunManifest {
        command: command.to_string(),
        model: spec.nonlinearity.name().to_string(),
        loss: spec.loss.name().to_string(),
        bounds: spec.nonlinearity.bounds(),
        rank: args.rank,
        rho0: args.rho0,
        adaptive: !args.no_adaptive_rho,
        mu: 10.0,
        tau_incr: 2.0,
        tau_decr: 2.0,
        ridge_factor: args.ridge_factor,
        rho_min: 1e-6,
        rho_max: 1e6,
        max_iter: args.max_iter,
        max_seconds: args.max_seconds,
        seed: args.seed,
        init: match args.init {
            InitArg::Svd => "svd".to_string(),
            InitArg::Random => "random".to_string(),
        },
        clip_to_bounds: args.clip_to_bounds,
        input: args.input.clone(),
        log: args
            .log
            .clone()
            .unwrap_or_else(|| out_dir.join("iterations.csv")),
        out_w: args.out_w.clone().unwrap_or_else(|| out_dir.join("w.csv")),
        out_h: args.out_h.clone().unwrap_or_else(|| out_dir.join("h.csv")),
        mask_path: None,
        observed_fraction: None,
        train_fraction: None,
        mask_train_count: None,
        mask_test_count: None,
        masks_disjoint: None,
        salt_pepper_density: None,
        poisson_scale: None,
        noise_seed: None,
    })
}

fn run_from_manifest(mut m: RunManifest, out_dir: &std::path::Path) -> ExitCode {
    match runner::execute(&mut m) {
        Ok(out) => {
            if let Err(e) = runner::persist_manifest(&m, out_dir) {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
            if m.command == "complete" {
                println!(
                    "rmse_train={:.9e} rmse_test={:.9e}",
                    out.rmse_train.unwrap_or(f64::NAN),
                    out.rmse_test.unwrap_or(f64::NAN)
                );
            } else {
                println!(
                    "final_objective={:.9e} iters={} seconds={:.3}",
                    out.final_objective, out.iterations, out.seconds
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn cmd_factorize(args: FactorizeArgs) -> ExitCode {
    if let Err(e) = std::fs::create_dir_all(&args.solve.out_dir) {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    match build_manifest("factorize", &args.solve) {
        Ok(m) => run_from_manifest(m, &args.solve.out_dir),
        Err(msg) => usage_error(&msg),
    }
}

fn cmd_complete(args: CompleteArgs) -> ExitCode {
    if args.mask.is_none() && args.observed_fraction.is_none() {
        return usage_error("complete requires --mask or --observed-fraction");
    }
    if let Some(f) = args.observed_fraction {
        if !(0.0 < f && f <= 1.0) {
            return usage_error("--observed-fraction must lie in (0, 1]");
        }
    }
    if !(0.0 < args.train_fraction && args.train_fraction < 1.0) {
        return usage_error("--train-fraction must lie strictly in (0, 1)");
    }
    if let Err(e) = std::fs::create_dir_all(&args.solve.out_dir) {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    match build_manifest("complete", &args.solve) {
        Ok(mut m) => {
            m.mask_path = args.mask.clone();
            m.observed_fraction = args.observed_fraction;
            m.train_fraction = Some(args.train_fraction);
            run_from_manifest(m, &args.solve.out_dir)
        }
        Err(msg) => usage_error(&msg),
    }
}

fn cmd_prox_check(args: ProxCheckArgs) -> ExitCode {
    if args.n == 0 {
        return usage_error("--n must be at least 1");
    }
    let specs: Vec<ModelSpec> = if args.all {
        let mut v = Vec::new();
        for loss in [LossArg::Fro, LossArg::Kl, LossArg::L1] {
            for model in [
                ModelArg::Relu,
                ModelArg::Csf,
                ModelArg::Minmax,
                ModelArg::Modulus,
            ] {
                let bounds = if loss == LossArg::Kl {
                    Some(vec![0.5, 1.0])
                } else {
                    Some(vec![0.0, 1.0])
                };
                v.push(model_spec_from_args(model, loss, &bounds).expect("static specs"));
            }
        }
        v
    } else {
        let (Some(model), Some(loss)) = (args.model, args.loss) else {
            return usage_error("prox-check requires --model and --loss, or --all");
        };
        let bounds = if model == ModelArg::Minmax {
            Some(if loss == LossArg::Kl {
                vec![0.5, 1.0]
            } else {
                vec![0.0, 1.0]
            })
        } else {
            None
        };
        match model_spec_from_args(model, loss, &bounds) {
            Ok(s) => vec![s],
            Err(msg) => return usage_error(&msg),
        }
    };

    let mut all_ok = true;
    let mut csv = String::new();
    for spec in &specs {
        match check_prox_batch(spec, args.n, args.seed) {
            Ok(report) => {
                print!("{}", report.to_text());
                if !report.passed() {
                    all_ok = false;
                }
                if args.csv.is_some() {
                    csv.push_str(&report.to_csv());
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code_for(&e));
            }
        }
    }
    if let Some(path) = &args.csv {
        if let Err(e) = std::fs::write(path, csv) {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    if all_ok {
        println!("all gaps within {GAP_THRESHOLD:.0e}");
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_experiment(args: ExperimentArgs) -> ExitCode {
    let data_dir = args
        .data_dir
        .or_else(|| std::env::var("NMD_DATA_DIR").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"));
    let ctx = ExperimentContext {
        out_dir: args
            .out_dir
            .unwrap_or_else(|| PathBuf::from("runs").join(&args.preset)),
        data_dir,
        time_scale: args.time_scale,
        parallel: args.parallel,
    };
    match experiment::dispatch(&args.preset, &ctx, args.poisson_scale) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if experiment::is_missing_dataset(&e) => {
            eprintln!("error: {e}");
            ExitCode::from(5)
        }
        Err(Error::Config(msg)) if msg.starts_with("unknown preset") => usage_error(&msg),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn cmd_rerun(path: PathBuf) -> ExitCode {
    match RunManifest::load(&path) {
        Ok(m) => {
            let out_dir = path
                .parent()
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."));
            run_from_manifest(m, &out_dir)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Factorize(args) => cmd_factorize(args),
        Command::Complete(args) => cmd_complete(args),
        Command::ProxCheck(args) => cmd_prox_check(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Rerun { manifest } => cmd_rerun(manifest),
    }
}
