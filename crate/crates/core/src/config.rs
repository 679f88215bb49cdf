//! Run configuration shared by every pipeline stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::macroscale::CaseName;
use crate::mechanics::MaterialParams;
use crate::net::TrainConfig;

pub const WORKDIR_ENV: &str = "HYPERFE_WORKDIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RveConfig {
    pub n_per_side: usize,
    #[serde(rename = "L", alias = "length")]
    pub length: f64,
    pub fiber_fraction: f64,
    /// Absolute ∞-norm tolerance of the cell Newton solve, N/mm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RveConfig {
    fn default() -> Self {
        Self {
            n_per_side: 32,
            length: 1.0,
            fiber_fraction: 0.55,
            tol: 1e-9,
            max_iter: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub n: usize,
    pub magnitude: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            magnitude: 0.04,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodConfig {
    pub p: usize,
}

impl Default for PodConfig {
    fn default() -> Self {
        Self { p: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacroConfig {
    pub case: CaseName,
    /// Elements per leg edge; `None` picks the case default.
    pub resolution: Option<usize>,
    /// Traction in N/mm; `None` picks the calibrated case default.
    pub load: Option<f64>,
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub repetitions: usize,
}

impl Default for MacroConfig {
    fn default() -> Self {
        Self {
            case: CaseName::LProfile,
            resolution: None,
            load: None,
            steps: 5,
            tol: 1e-8,
            max_iter: 25,
            repetitions: 1,
        }
    }
}

impl MacroConfig {
    pub fn resolution_for(&self, case: CaseName) -> usize {
        self.resolution.unwrap_or(case.default_resolution())
    }

    pub fn load_for(&self, case: CaseName) -> f64 {
        self.load.unwrap_or(case.default_load())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub workdir: Option<PathBuf>,
    /// Checkpoint directory; defaults to `<workdir>/checkpoints`.
    pub checkpoint: Option<PathBuf>,
    /// Snapshot directory; defaults to `<workdir>/snapshots`.
    pub snapshots: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rve: RveConfig,
    pub materials: MaterialParams,
    pub sampling: SamplingConfig,
    pub pod: PodConfig,
    pub training: TrainConfig,
    #[serde(rename = "macro")]
    pub macro_: MacroConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.materials.validate()?;
        self.training.validate()?;
        if self.rve.n_per_side < 8 {
            return Err(Error::Config(format!("rve.n_per_side must be at least 8, got {}", self.rve.n_per_side)));
        }
        if !(self.rve.tol > 0.0) || self.rve.max_iter == 0 {
            return Err(Error::Config("rve.tol and rve.max_iter must be positive".into()));
        }
        if self.sampling.n == 0 || !(self.sampling.magnitude > 0.0) {
            return Err(Error::Config("sampling.n and sampling.magnitude must be positive".into()));
        }
        if self.pod.p == 0 {
            return Err(Error::Config("pod.p must be at least 1".into()));
        }
        if self.macro_.steps == 0 || self.macro_.max_iter == 0 || !(self.macro_.tol > 0.0) {
            return Err(Error::Config("macro.steps, macro.tol and macro.max_iter must be positive".into()));
        }
        if self.macro_.resolution == Some(0) {
            return Err(Error::Config("macro.resolution must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        io::hash_bytes("config", self.to_toml().as_bytes())
    }

    /// Workdir from `HYPERFE_WORKDIR`, else `paths.workdir`, else `./work`.
    pub fn workdir(&self) -> PathBuf {
        match std::env::var_os(WORKDIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.paths.workdir.clone().unwrap_or_else(|| PathBuf::from("work")),
        }
    }

    pub fn snapshots_dir(&self) -> PathBuf {
        self.paths.snapshots.clone().unwrap_or_else(|| self.workdir().join("snapshots"))
    }

    pub fn pod_dir(&self) -> PathBuf {
        self.workdir().join("pod")
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.paths.checkpoint.clone().unwrap_or_else(|| self.workdir().join("checkpoints"))
    }

    pub fn results_dir(&self) -> PathBuf {
        self.workdir().join("results")
    }
}
