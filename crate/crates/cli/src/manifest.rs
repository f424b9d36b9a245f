//! Run manifest: everything needed to reproduce a run exactly.

use nmd_core::error::{Error, Result};
use nmd_core::model::{Loss, ModelSpec, Nonlinearity};
use nmd_core::solver::{InitMode, SolverConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// `factorize` or `complete`.
    pub command: String,
    pub model: String,
    pub loss: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(f64, f64)>,
    pub rank: usize,
    pub rho0: f64,
    pub adaptive: bool,
    pub mu: f64,
    pub tau_incr: f64,
    pub tau_decr: f64,
    pub ridge_factor: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub max_iter: usize,
    /// `None` means no wall-clock budget.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_seconds: Option<f64>,
    pub seed: u64,
    pub init: String,
    pub clip_to_bounds: bool,

    pub input: PathBuf,
    pub log: PathBuf,
    pub out_w: PathBuf,
    pub out_h: PathBuf,

    // completion settings
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_train_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_test_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masks_disjoint: Option<bool>,

    // noise settings used by experiment presets
    #[serde(skip_serializing_if = "Option::is_none")]
    pub salt_pepper_density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisson_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,
}

impl RunManifest {
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let nonlinearity = match self.model.as_str() {
            "relu" => Nonlinearity::Relu,
            "csf" => Nonlinearity::Csf,
            "modulus" => Nonlinearity::Modulus,
            "minmax" => {
                let (p, q) = self.bounds.ok_or_else(|| {
                    Error::Config("manifest: minmax model requires bounds".into())
                })?;
                Nonlinearity::min_max(p, q)?
            }
            other => return Err(Error::Config(format!("manifest: unknown model '{other}'"))),
        };
        let loss = match self.loss.as_str() {
            "fro" => Loss::Frobenius,
            "l1" => Loss::L1,
            "kl" => Loss::Kl,
            other => return Err(Error::Config(format!("manifest: unknown loss '{other}'"))),
        };
        ModelSpec::new(nonlinearity, loss)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        Ok(SolverConfig {
            rank: self.rank,
            rho0: self.rho0,
            adaptive: self.adaptive,
            mu: self.mu,
            tau_incr: self.tau_incr,
            tau_decr: self.tau_decr,
            ridge_factor: self.ridge_factor,
            rho_min: self.rho_min,
            rho_max: self.rho_max,
            max_iter: self.max_iter,
            max_seconds: self.max_seconds.unwrap_or(f64::INFINITY),
            seed: self.seed,
            init: match self.init.as_str() {
                "svd" => InitMode::Svd,
                "random" => InitMode::Random,
                other => return Err(Error::Config(format!("manifest: unknown init '{other}'"))),
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: format!("manifest: {e}"),
        })
    }
}
