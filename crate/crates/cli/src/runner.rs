//! Executes factorize and complete runs described by a manifest.

use crate::manifest::RunManifest;
use nmd_core::error::{Error, Result};
use nmd_core::io::{detect_format, load_matrix, save_csv, IterationLogWriter};
use nmd_core::mask::{make_mask, rmse_on, split_train_test, ObservationMask};
use nmd_core::matrix::DenseMatrix;
use nmd_core::model::relative_objective_masked;
use nmd_core::solver::run;
use nmd_core::{io, Loss};
use std::path::Path;

pub struct RunOutput {
    pub final_objective: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub rmse_train: Option<f64>,
    pub rmse_test: Option<f64>,
}

fn load_input(manifest: &RunManifest) -> Result<DenseMatrix> {
    let format = detect_format(&manifest.input)?;
    load_matrix(&manifest.input, format)
}

/// Resolves the observation mask and train/test split for a completion run.
fn build_split(
    manifest: &RunManifest,
    rows: usize,
    cols: usize,
) -> Result<(ObservationMask, ObservationMask)> {
    let omega = match (&manifest.mask_path, manifest.observed_fraction) {
        (Some(path), _) => io::load_mask(path, rows, cols)?,
        (None, Some(fraction)) => {
            if fraction >= 1.0 {
                ObservationMask::full(rows, cols)
            } else {
                make_mask(rows, cols, fraction, manifest.seed)?
            }
        }
        (None, None) => {
            return Err(Error::Config(
                "completion needs --mask or --observed-fraction".into(),
            ))
        }
    };
    let train_fraction = manifest.train_fraction.unwrap_or(0.8);
    let split = split_train_test(&omega, train_fraction, manifest.seed)?;
    Ok((split.train, split.test))
}

/// Runs the solve described by the manifest, writing the iteration log and
/// factor files. For completion manifests the split masks and RMSE values
/// are produced as well, and the manifest fields describing the split are
/// filled in.
pub fn execute(manifest: &mut RunManifest) -> Result<RunOutput> {
    let spec = manifest.model_spec()?;
    let cfg = manifest.solver_config()?;
    let mut x = load_input(manifest)?;

    let completion = manifest.command == "complete";
    let (train_mask, test_mask) = if completion {
        let (train, test) = build_split(manifest, x.rows(), x.cols())?;
        manifest.mask_train_count = Some(train.count());
        manifest.mask_test_count = Some(test.count());
        let disjoint = (0..x.rows() * x.cols())
            .all(|i| !(train.is_observed_linear(i) && test.is_observed_linear(i)));
        manifest.masks_disjoint = Some(disjoint);
        (Some(train), Some(test))
    } else {
        (None, None)
    };

    if manifest.clip_to_bounds {
        let (clipped, n) = spec.clip_to_bounds(&x);
        if n > 0 {
            eprintln!("warning: clipped {n} entries to the MinMax bounds");
        }
        x = clipped;
    }
    // KL losses additionally require nonnegative data everywhere it is read.
    if spec.loss == Loss::Kl && x.as_slice().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("KL loss requires nonnegative data".into()));
    }
    spec.validate_data(&x, train_mask.as_ref())?;

    // Completion protocol: entries outside the training set are zeroed for
    // the solve; evaluation uses the original values.
    let x_original = x.clone();
    if let Some(train) = &train_mask {
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                if !train.is_observed(i, j) {
                    x.set(i, j, 0.0);
                }
            }
        }
    }

    let start = std::time::Instant::now();
    let mut log = IterationLogWriter::create(&manifest.log)?;
    let result = {
        let mut sink = |r: &nmd_core::solver::IterationRecord| {
            let _ = log.write(r);
        };
        run(&spec, &x, &cfg, train_mask.as_ref(), Some(&mut sink))?
    };
    log.finish()?;
    let seconds = start.elapsed().as_secs_f64();

    save_csv(&result.w, &manifest.out_w)?;
    save_csv(&result.h, &manifest.out_h)?;

    let prediction = result.prediction()?;
    let final_objective = relative_objective_masked(&spec, &x, &prediction, train_mask.as_ref())?;

    let (rmse_train, rmse_test) = match (&train_mask, &test_mask) {
        (Some(train), Some(test)) => {
            let fitted = prediction.map(|v| spec.nonlinearity.apply_scalar(v));
            (
                Some(rmse_on(&x_original, &fitted, train)?),
                Some(rmse_on(&x_original, &fitted, test)?),
            )
        }
        _ => (None, None),
    };

    Ok(RunOutput {
        final_objective,
        iterations: result.records.len(),
        seconds,
        rmse_train,
        rmse_test,
    })
}

/// Writes the manifest next to the other outputs.
pub fn persist_manifest(manifest: &RunManifest, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    manifest.save(&dir.join("manifest.json"))
}
