//! Experiment configuration: a single versioned JSON document.
//!
//! Unknown keys are rejected so typos fail loudly; every run writes its
//! fully resolved configuration next to its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use girn::data::LabelScheme;
use girn::group::GroupName;
use girn::image::Grid;
use girn::recon::{MemoryTerm, SameGdConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub dataset: DatasetConfig,
    /// "trivial" | "flip_h" | "klein4" | "d4"
    pub group: String,
    #[serde(default)]
    pub arch: ArchConfig,
    #[serde(default)]
    pub train: TrainSection,
    /// "am" | "kkt" | "kkt_same_gd" | "kkt_dip"
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default)]
    pub recon: ReconSection,
    #[serde(default)]
    pub eval: EvalSection,
    pub out: PathBuf,
}

fn default_method() -> String {
    "kkt".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Synthetic {
        seed: u64,
        n: usize,
        grid: [usize; 2],
    },
    MnistIdx {
        images: PathBuf,
        labels: PathBuf,
        n: usize,
        #[serde(default = "default_parity")]
        label_scheme: String,
        #[serde(default)]
        downscale: Option<[usize; 2]>,
    },
    Cifar10Bin {
        path: PathBuf,
        n: usize,
        #[serde(default = "default_animal_vehicle")]
        label_scheme: String,
        #[serde(default)]
        downscale: Option<[usize; 2]>,
    },
}

fn default_parity() -> String {
    "parity".to_string()
}

fn default_animal_vehicle() -> String {
    "animal_vehicle".to_string()
}

impl DatasetConfig {
    pub fn n(&self) -> usize {
        match self {
            DatasetConfig::Synthetic { n, .. }
            | DatasetConfig::MnistIdx { n, .. }
            | DatasetConfig::Cifar10Bin { n, .. } => *n,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    /// Multiplier on the conventional `1/sqrt(fan_in)` Gaussian init.
    /// Stationarity-based attacks need the trained weights to outgrow the
    /// initialization, so the desk-scale default is well below 1.
    pub init_scale: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            hidden1: 100,
            hidden2: 100,
            init_scale: 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub target_loss: f64,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            learning_rate: 0.5,
            epochs: 40_000,
            target_loss: 1e-5,
            seed: 0,
            log_every: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconSection {
    /// Candidate count; defaults to `4 * n`.
    #[serde(default)]
    pub m: Option<usize>,
    /// Optimization steps; method-specific default when omitted.
    #[serde(default)]
    pub steps: Option<usize>,
    /// Candidate step size; method-specific default when omitted.
    #[serde(default)]
    pub lr: Option<f64>,
    #[serde(default = "default_lambda_lr")]
    pub lambda_lr: f64,
    /// Dual initialization range `[lo, hi]`.
    #[serde(default = "default_lambda_init")]
    pub lambda_init: [f64; 2],
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub dump_pgm: bool,
    #[serde(default)]
    pub same_gd: SameGdSection,
    #[serde(default)]
    pub dip: DipSection,
}

fn default_lambda_lr() -> f64 {
    1e-8
}

fn default_lambda_init() -> [f64; 2] {
    [5e-4, 1e-3]
}

fn default_seeds() -> Vec<u64> {
    vec![11, 12, 13]
}

impl Default for ReconSection {
    fn default() -> Self {
        ReconSection {
            m: None,
            steps: None,
            lr: None,
            lambda_lr: default_lambda_lr(),
            lambda_init: default_lambda_init(),
            seeds: default_seeds(),
            dump_pgm: false,
            same_gd: SameGdSection::default(),
            dip: DipSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SameGdSection {
    pub alpha: f64,
    pub beta: f64,
    pub t_update: usize,
    pub t_save: usize,
    /// "elementwise_square" | "raw_gradient"
    pub memory_term: String,
}

impl Default for SameGdSection {
    fn default() -> Self {
        SameGdSection {
            alpha: 0.98,
            beta: 0.9,
            t_update: 25,
            t_save: 25,
            memory_term: "elementwise_square".to_string(),
        }
    }
}

impl SameGdSection {
    pub fn to_schedule(&self) -> Result<SameGdConfig> {
        let memory_term = match self.memory_term.as_str() {
            "elementwise_square" => MemoryTerm::ElementwiseSquare,
            "raw_gradient" => MemoryTerm::RawGradient,
            other => bail!("unknown memory_term {other:?}"),
        };
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            bail!("same_gd alpha/beta must lie in [0, 1]");
        }
        if self.t_update == 0 || self.t_save == 0 {
            bail!("same_gd t_update and t_save must be >= 1");
        }
        Ok(SameGdConfig {
            alpha: self.alpha,
            beta: self.beta,
            t_update: self.t_update,
            t_save: self.t_save,
            memory_term,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipSection {
    pub channels: usize,
}

impl Default for DipSection {
    fn default() -> Self {
        DipSection { channels: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    None,
    Clamp,
    Minmax,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Orbitope bins per simplex edge; group-order-dependent default when
    /// omitted (10 for orbits of size <= 2, 4 for larger).
    #[serde(default)]
    pub orbitope_resolution: Option<u32>,
    /// How candidates are brought into the `[0, 1]` range the image metric
    /// expects. Per-candidate min-max is the default: reconstructions are
    /// recovered only up to scale.
    #[serde(default = "default_normalize")]
    pub normalize: Normalize,
}

fn default_normalize() -> Normalize {
    Normalize::Minmax
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            orbitope_resolution: None,
            normalize: default_normalize(),
        }
    }
}

/// Sweep configuration: a base experiment plus lists over group, training
/// set size, and method. Seeds come from `base.recon.seeds`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub version: u32,
    pub base: ExperimentConfig,
    pub groups: Vec<String>,
    pub n_values: Vec<usize>,
    pub methods: Vec<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            );
        }
        GroupName::parse(&self.group).map_err(|e| anyhow::anyhow!(e))?;
        if !matches!(self.method.as_str(), "am" | "kkt" | "kkt_same_gd" | "kkt_dip") {
            bail!("unknown method {:?}", self.method);
        }
        if self.dataset.n() == 0 {
            bail!("dataset n must be >= 1");
        }
        match &self.dataset {
            DatasetConfig::Synthetic { grid, .. } => {
                if grid[0] == 0 || grid[1] == 0 {
                    bail!("synthetic grid must be nonempty");
                }
            }
            DatasetConfig::MnistIdx { label_scheme, .. }
            | DatasetConfig::Cifar10Bin { label_scheme, .. } => {
                LabelScheme::parse(label_scheme).map_err(|e| anyhow::anyhow!(e))?;
            }
        }
        if self.train.learning_rate <= 0.0 {
            bail!("train.learning_rate must be > 0");
        }
        if self.train.epochs == 0 {
            bail!("train.epochs must be >= 1");
        }
        let [lo, hi] = self.recon.lambda_init;
        if !(0.0 <= lo && lo <= hi) {
            bail!("recon.lambda_init must satisfy 0 <= lo <= hi");
        }
        if self.recon.seeds.is_empty() {
            bail!("recon.seeds must not be empty");
        }
        self.recon.same_gd.to_schedule()?;
        if self.recon.dip.channels == 0 {
            bail!("recon.dip.channels must be >= 1");
        }
        if let Some(0) = self.eval.orbitope_resolution {
            bail!("eval.orbitope_resolution must be >= 1");
        }
        Ok(())
    }

    pub fn group_name(&self) -> GroupName {
        GroupName::parse(&self.group).expect("validated")
    }

    pub fn grid(&self) -> Grid {
        match &self.dataset {
            DatasetConfig::Synthetic { grid, .. } => Grid::new(grid[0], grid[1]),
            DatasetConfig::MnistIdx { downscale, .. } => match downscale {
                Some([h, w]) => Grid::new(*h, *w),
                None => Grid::new(28, 28),
            },
            DatasetConfig::Cifar10Bin { downscale, .. } => match downscale {
                Some([h, w]) => Grid::new(*h, *w),
                None => Grid::new(32, 32),
            },
        }
    }

    /// Candidate count: configured or `4 * n`.
    pub fn m(&self) -> usize {
        self.recon.m.unwrap_or(4 * self.dataset.n())
    }

    /// Method-specific optimizer defaults: activation maximization grows
    /// candidates with small steps; the stationarity objective runs the
    /// slow-dual regime with a larger candidate step.
    pub fn recon_steps(&self) -> usize {
        self.recon.steps.unwrap_or(match self.method.as_str() {
            "am" => 3000,
            "kkt_dip" => 1500,
            _ => 5000,
        })
    }

    pub fn recon_lr(&self) -> f64 {
        self.recon.lr.unwrap_or(match self.method.as_str() {
            "am" => 0.01,
            "kkt_dip" => 0.05,
            _ => 0.2,
        })
    }

    pub fn orbitope_resolution(&self, group_order: usize) -> u32 {
        self.eval
            .orbitope_resolution
            .unwrap_or(if group_order <= 2 { 10 } else { 4 })
    }

    /// Persist the fully resolved config beside the run outputs.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut resolved = self.clone();
        resolved.recon.m = Some(self.m());
        resolved.recon.steps = Some(self.recon_steps());
        resolved.recon.lr = Some(self.recon_lr());
        resolved.eval.orbitope_resolution = Some(self.orbitope_resolution(
            girn::group::GroupSpec::new(self.group_name(), self.grid())
                .map(|g| g.order())
                .unwrap_or(1),
        ));
        let text = serde_json::to_string_pretty(&resolved)?;
        fs::write(dir.join("config.resolved.json"), text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "version": 1,
            "dataset": { "kind": "synthetic", "seed": 1, "n": 4, "grid": [8, 8] },
            "group": "flip_h",
            "out": "/tmp/girn-test-run"
        }"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config: ExperimentConfig = serde_json::from_str(&minimal_json()).unwrap();
        config.validate().unwrap();
        assert_eq!(config.m(), 16);
        assert_eq!(config.method, "kkt");
        assert_eq!(config.recon_steps(), 5000);
        assert_eq!(config.orbitope_resolution(2), 10);
        assert_eq!(config.orbitope_resolution(8), 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = minimal_json().replace("\"group\"", "\"grup_typo\": 1, \"group\"");
        assert!(serde_json::from_str::<ExperimentConfig>(&bad).is_err());
    }

    #[test]
    fn bad_group_and_method_are_rejected() {
        let mut config: ExperimentConfig = serde_json::from_str(&minimal_json()).unwrap();
        config.group = "octahedral".into();
        assert!(config.validate().is_err());
        let mut config: ExperimentConfig = serde_json::from_str(&minimal_json()).unwrap();
        config.method = "gradient_inversion".into();
        assert!(config.validate().is_err());
    }

    #[test]
    fn wrong_version_is_rejected() {
        let bad = minimal_json().replace("\"version\": 1", "\"version\": 9");
        let config: ExperimentConfig = serde_json::from_str(&bad).unwrap();
        assert!(config.validate().is_err());
    }
}
