//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use relaynet::deepopt::{InitConfig, SnapshotPolicy, TrainConfig};
use relaynet::linopt::LinearConfig;
use relaynet::modem::{ModulationSpec, ReceiverKind};
use relaynet::netgen::{Fixture, SpatialConfig};
use relaynet::sim::SimConfig;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkConfig {
    Fixture(Fixture),
    /// Random sector network; its `seed` is replaced by the run seed.
    Spatial(SpatialConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerChoice {
    Linear,
    Dr,
    #[default]
    Both,
}

impl OptimizerChoice {
    pub fn linear(self) -> bool {
        matches!(self, OptimizerChoice::Linear | OptimizerChoice::Both)
    }

    pub fn dr(self) -> bool {
        matches!(self, OptimizerChoice::Dr | OptimizerChoice::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MedianConfig {
    pub relay_counts: Vec<usize>,
    /// Cell-edge SNR (dB) at which every realization is evaluated.
    pub snr_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    /// SNR point whose parameters are plotted.
    pub snr_db: f64,
}

fn default_receivers() -> Vec<ReceiverKind> {
    vec![ReceiverKind::Standard]
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}
fn default_p_max() -> f64 {
    0.64
}
fn default_margin() -> f64 {
    30.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub network: NetworkConfig,
    pub modulation: ModulationSpec,
    #[serde(default)]
    pub optimizer: OptimizerChoice,
    /// Receiver flavours trained by the deep-relay optimizer. The linear
    /// design always uses standard receivers.
    #[serde(default = "default_receivers")]
    pub receivers: Vec<ReceiverKind>,
    /// Evaluation points: `1/sigma^2` in dB for fixtures, cell-edge SNR in
    /// dB for spatial networks.
    pub snr_db: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    /// Also evaluate the direct-link network without relays (spatial only).
    #[serde(default)]
    pub reference: bool,
    /// Training starts this many dB above the highest SNR point.
    #[serde(default = "default_margin")]
    pub curriculum_margin_db: f64,
    #[serde(default)]
    pub snapshot: SnapshotPolicy,
    #[serde(default)]
    pub linear: LinearConfig,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub median: Option<MedianConfig>,
    #[serde(default)]
    pub transfer: Option<TransferConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.modulation.validate()?;
        self.sim.validate()?;
        self.train_config().validate()?;
        if self.snr_db.is_empty() || self.snr_db.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Config("snr_db must be nonempty and strictly increasing".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("at least one seed is required".into()));
        }
        if !(self.p_max > 0.0) {
            return Err(CliError::Config("p_max must be positive".into()));
        }
        if self.optimizer.dr() && self.receivers.is_empty() {
            return Err(CliError::Config("deep-relay training needs a receiver kind".into()));
        }
        match &self.network {
            NetworkConfig::Fixture(f) => {
                let receivers = relaynet::netgen::fixture(*f).receivers;
                if receivers != self.modulation.users {
                    return Err(CliError::Config(format!(
                        "fixture {f} has {receivers} receivers but the modulation has {} users",
                        self.modulation.users
                    )));
                }
                if self.reference {
                    return Err(CliError::Config("the no-relay reference needs a spatial network".into()));
                }
            }
            NetworkConfig::Spatial(s) => {
                s.validate()?;
                if s.receivers != self.modulation.users {
                    return Err(CliError::Config(format!(
                        "{} receivers but {} users",
                        s.receivers, self.modulation.users
                    )));
                }
                if s.relays == 0 && self.optimizer.dr() {
                    return Err(CliError::Config("no relays to train".into()));
                }
            }
        }
        if let Some(m) = &self.median {
            if m.relay_counts.is_empty() {
                return Err(CliError::Config("median study needs relay counts".into()));
            }
            if !matches!(self.network, NetworkConfig::Spatial(_)) {
                return Err(CliError::Config("median study needs a spatial network".into()));
            }
        }
        Ok(())
    }

    /// Noise variance of an SNR point.
    pub fn sigma2(&self, snr_db: f64) -> f64 {
        match &self.network {
            NetworkConfig::Fixture(_) => 10f64.powf(-snr_db / 10.0),
            NetworkConfig::Spatial(s) => s.sigma2_for_cell_edge_snr(snr_db),
        }
    }

    /// Largest noise variance on the grid: where training stops.
    pub fn sigma2_max(&self) -> f64 {
        self.sigma2(self.snr_db[0])
    }

    /// Starting curriculum variance: the margin above the best grid point.
    pub fn sigma2_start(&self) -> f64 {
        let top = *self.snr_db.last().unwrap();
        self.sigma2(top + self.curriculum_margin_db)
    }

    /// Training settings, with network-appropriate initialization defaults.
    pub fn train_config(&self) -> TrainConfig {
        match &self.train {
            Some(t) => t.clone(),
            None => {
                let mut t = TrainConfig::default();
                if matches!(self.network, NetworkConfig::Spatial(_)) {
                    t.init = InitConfig::spatial();
                }
                t
            }
        }
    }

    pub fn linear_config(&self, seed: u64) -> LinearConfig {
        let mut l = self.linear.clone();
        l.p_max = self.p_max;
        l.init_seed = seed;
        l
    }

    pub fn output_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        cli_out
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }
}
