//! TOML run configurations.
//!
//! Every struct rejects unknown keys so a typo fails loudly instead of
//! silently becoming a default. Each command writes its fully resolved
//! config (flag overrides and defaults baked in) beside the outputs; the
//! written file is itself a valid config for the same command.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use progrom::augment::BlurMode;
use progrom::column::{DEFAULT_LATENT_DIM, DEFAULT_PROJECTOR_DIM};
use progrom::datagen::{HoleSpec, Problem, ProblemSpec};
use progrom::latent::DEFAULT_RIDGE;
use progrom::loss::DEFAULT_LAMBDA;
use progrom::progressive::InitMode;
use progrom::train::TrainConfig;

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn default_latent_dim() -> usize {
    DEFAULT_LATENT_DIM
}

fn default_projector_dim() -> usize {
    DEFAULT_PROJECTOR_DIM
}

fn default_init() -> InitMode {
    InitMode::Scratch
}

fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

/// Grid/time overrides applied onto a problem family's reference defaults.
/// Keys left out keep the default; the resolved config written after a run
/// has every key filled in.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemPatch {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nz: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ly: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub safety: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holes: Vec<HoleSpec>,
}

impl ProblemPatch {
    /// Problem defaults with this patch applied.
    pub fn resolve(&self, problem: Problem) -> ProblemSpec {
        let mut spec = ProblemSpec::defaults(problem);
        if let Some(nx) = self.nx {
            spec.grid.nx = nx;
        }
        if let Some(ny) = self.ny {
            spec.grid.ny = ny;
        }
        if let Some(nz) = self.nz {
            spec.grid.nz = nz;
        }
        if let Some(lx) = self.lx {
            spec.grid.lx = lx;
        }
        if let Some(ly) = self.ly {
            spec.grid.ly = ly;
        }
        if let Some(lz) = self.lz {
            spec.grid.lz = lz;
        }
        if let Some(tau) = self.tau {
            spec.tau = tau;
        }
        if let Some(stride) = self.record_stride {
            spec.record_stride = stride;
        }
        if let Some(safety) = self.safety {
            spec.safety = safety;
        }
        spec.holes = self.holes.clone();
        spec
    }

    /// Fully populated patch reproducing `spec` from any default.
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        ProblemPatch {
            nx: Some(spec.grid.nx),
            ny: Some(spec.grid.ny),
            nz: Some(spec.grid.nz),
            lx: Some(spec.grid.lx),
            ly: Some(spec.grid.ly),
            lz: Some(spec.grid.lz),
            tau: Some(spec.tau),
            record_stride: Some(spec.record_stride),
            safety: Some(spec.safety),
            holes: spec.holes.clone(),
        }
    }
}

/// Training hyperparameters; `Default` gives the reference settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyper {
    pub epochs: usize,
    pub batch_outer: usize,
    pub batch_inner: usize,
    pub lambda: f64,
    pub noise_eps: f64,
    pub blur: BlurMode,
    pub eta_min: f64,
    pub eta_max: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        let reference = TrainConfig::default();
        Hyper {
            epochs: reference.epochs,
            batch_outer: reference.batch_outer,
            batch_inner: reference.batch_inner,
            lambda: DEFAULT_LAMBDA,
            noise_eps: reference.noise_eps,
            blur: reference.blur,
            eta_min: reference.eta_min,
            eta_max: reference.eta_max,
        }
    }
}

impl Hyper {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_outer: self.batch_outer,
            batch_inner: self.batch_inner,
            lambda: self.lambda,
            noise_eps: self.noise_eps,
            blur: self.blur,
            eta_min: self.eta_min,
            eta_max: self.eta_max,
            seed,
            ..TrainConfig::default()
        }
    }
}

/// Config for `generate`: sample a snapshot family into a bundle directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub problem: Problem,
    /// Training parameter points (evenly spread over the parameter box).
    pub m_train: usize,
    /// Random held-out test points.
    #[serde(default)]
    pub m_test: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub overrides: ProblemPatch,
}

/// Config shared by `train` (no parents allowed) and `chain`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCmdConfig {
    /// Snapshot bundle directory produced by `generate`.
    pub data: PathBuf,
    /// Frozen checkpoint directories to attach laterals from, oldest first.
    #[serde(default)]
    pub parents: Vec<PathBuf>,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "default_projector_dim")]
    pub projector_dim: usize,
    #[serde(default = "default_init")]
    pub init: InitMode,
    /// Diagonal regularization for the latent interpolant fit.
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub train: Hyper,
}

/// Config for `eval`: run a checkpoint against a bundle's test samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Config for `sweep`: the (parent set x training size x seed) table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub problem: Problem,
    /// Training-set sizes to sweep.
    pub m_values: Vec<usize>,
    pub m_test: usize,
    /// Seed for snapshot generation (shared by every cell so the data,
    /// and in particular the test set, is identical across cells).
    pub data_seed: u64,
    /// One entry per stack variant; each lists parent checkpoint
    /// directories (empty = train from scratch).
    pub parent_sets: Vec<Vec<PathBuf>>,
    /// Training seeds; every (parent set, m) pair runs once per seed.
    pub seeds: Vec<u64>,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "default_projector_dim")]
    pub projector_dim: usize,
    #[serde(default = "default_init")]
    pub init: InitMode,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub overrides: ProblemPatch,
    #[serde(default)]
    pub train: Hyper,
}
