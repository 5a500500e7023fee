use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bures_core::ansatz::AnsatzConfig;
use bures_core::purify::{Family, ResourceSpec};
use bures_core::simulator::DensityMatrix;
use bures_core::states::{dephased_cluster, noisy_smolin, werner};
use bures_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result, RunOptions};

/// Built-in noisy benchmark states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Werner,
    Cluster,
    Smolin,
}

impl Preset {
    pub fn state(&self, p: f64) -> bures_core::Result<DensityMatrix> {
        match self {
            Preset::Werner => werner(p),
            Preset::Cluster => dephased_cluster(p),
            Preset::Smolin => noisy_smolin(p),
        }
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            Preset::Werner => 2,
            Preset::Cluster => 3,
            Preset::Smolin => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Werner => "werner",
            Preset::Cluster => "cluster",
            Preset::Smolin => "smolin",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "werner" => Ok(Preset::Werner),
            "cluster" => Ok(Preset::Cluster),
            "smolin" => Ok(Preset::Smolin),
            other => Err(CliError::Preset(other.to_string())),
        }
    }
}

/// Where the target state comes from. A file state ignores `p`; grid values
/// then only label rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSource {
    Preset(Preset),
    File { file: PathBuf },
}

impl StateSource {
    pub fn state(&self, p: f64) -> Result<DensityMatrix> {
        Ok(match self {
            StateSource::Preset(preset) => preset.state(p)?,
            StateSource::File { file } => DensityMatrix::load(file)?,
        })
    }
}

/// One experiment: a state family over a noise grid, trained with fixed
/// hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub state: StateSource,
    pub grid: Vec<f64>,
    pub resource: ResourceSpec,
    pub ansatz: AnsatzConfig,
    pub train: TrainConfig,
    /// CSV file name inside the output directory; defaults to `<name>.csv`.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub emit_trace: bool,
}

impl ExperimentConfig {
    /// Reads and validates a config. Relative state files resolve against
    /// the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        if let StateSource::File { file } = &mut cfg.state {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(CliError::Config("name must not be empty".into()));
        }
        if let Some(p) = self.grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(CliError::Config(format!("grid value {p} is outside [0, 1]")));
        }
        self.resource.validate()?;
        self.ansatz.validate()?;
        self.train.validate()?;
        if let StateSource::Preset(preset) = &self.state {
            let n = self.resource.num_system_qubits();
            if n != preset.num_qubits() {
                return Err(CliError::Config(format!(
                    "partition covers {n} qubits but the {preset} state has {}",
                    preset.num_qubits()
                )));
            }
        }
        Ok(())
    }

    /// Training settings after command-line overrides.
    pub fn effective_train(&self, opts: &RunOptions) -> TrainConfig {
        let mut train = self.train.clone();
        if let Some(seed) = opts.seed {
            train.seed = seed;
        }
        if opts.fast {
            train.epochs = (train.epochs / 10).max(1);
            train.restarts = (train.restarts / 10).max(1);
        }
        train
    }

    pub fn output_path(&self, opts: &RunOptions) -> PathBuf {
        opts.out_dir.join(self.output.clone().unwrap_or_else(|| format!("{}.csv", self.name)))
    }

    /// Whether an analytic `R/2` exists for this experiment.
    pub fn has_oracle(&self) -> bool {
        self.state == StateSource::Preset(Preset::Werner)
            && self.resource.family == Family::Separable
            && self.resource.partition == [1, 1]
    }
}
