//! Curriculum training on one fixed batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::gradient::{evaluate, Batch};
use super::init::{initialize_detailed, InitConfig};
use super::loss::LossConfig;
use crate::error::{Error, Result};
use crate::model::{Network, NoiseBatch, RelayParams, Topology};
use crate::modem::{BitFrame, ModulationSpec, ReceiverKind};

fn default_factor() -> f64 {
    1.5
}
fn default_threshold() -> f64 {
    0.05
}
fn default_stage_iters() -> usize {
    2000
}
fn default_stages() -> usize {
    60
}
fn default_true() -> bool {
    true
}

/// Noise-variance schedule: the variance grows by `factor` every time the
/// training error rate drops below `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub sigma2: f64,
    pub factor: f64,
    pub threshold: f64,
    pub stage: usize,
}

impl Curriculum {
    pub fn new(sigma2: f64) -> Self {
        Self {
            sigma2,
            factor: default_factor(),
            threshold: default_threshold(),
            stage: 0,
        }
    }

    /// Feeds one batch error rate; returns whether the stage advanced.
    pub fn observe(&mut self, ber: f64) -> bool {
        if ber < self.threshold {
            self.sigma2 *= self.factor;
            self.stage += 1;
            true
        } else {
            false
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub init: InitConfig,
    /// Starting noise variance; defaults to the target divided by 1000.
    #[serde(default)]
    pub sigma2_start: Option<f64>,
    #[serde(default = "default_factor")]
    pub factor: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_stage_iters")]
    pub max_stage_iterations: usize,
    #[serde(default = "default_stages")]
    pub max_stages: usize,
    /// Draw new unit noise at every stage instead of rescaling one draw.
    #[serde(default)]
    pub fresh_noise_per_stage: bool,
    /// Scale ADAM steps to the natural size of each parameter.
    #[serde(default = "default_true")]
    pub scale_steps: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            adam: AdamConfig::default(),
            init: InitConfig::default(),
            sigma2_start: None,
            factor: default_factor(),
            threshold: default_threshold(),
            max_stage_iterations: default_stage_iters(),
            max_stages: default_stages(),
            fresh_noise_per_stage: false,
            scale_steps: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.adam.validate()?;
        if !(self.factor > 1.0) || !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(
                "curriculum needs factor > 1 and a threshold in (0, 1]".into(),
            ));
        }
        if self.max_stage_iterations == 0 || self.max_stages == 0 {
            return Err(Error::Config("iteration caps must be positive".into()));
        }
        if let Some(s) = self.sigma2_start {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(
                    "starting noise variance must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub stage: usize,
    pub sigma2: f64,
    pub iter: usize,
    pub loss: f64,
    pub ber_worst: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSnapshot {
    pub stage: usize,
    pub sigma2: f64,
    pub iterations: usize,
    pub ber_worst: f64,
    pub params: RelayParams,
}

/// Optimizer state of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub params: RelayParams,
    pub adam: Adam,
    pub curriculum: Curriculum,
    pub history: Vec<HistoryRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    StageIterations,
    StageLimit,
}

/// Which trained parameters serve an evaluation at a given noise level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotPolicy {
    /// The parameters at the end of training, for every noise level.
    #[default]
    Final,
    /// The stage snapshot whose variance is nearest on a log scale.
    Nearest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub snapshots: Vec<StageSnapshot>,
    pub stop: StopReason,
}

impl TrainOutcome {
    pub fn params_with(&self, policy: SnapshotPolicy, sigma2: f64) -> &RelayParams {
        match policy {
            SnapshotPolicy::Final => &self.state.params,
            SnapshotPolicy::Nearest => self.params_for(sigma2),
        }
    }

    /// Snapshot whose stage variance is nearest `sigma2` on a log scale.
    pub fn params_for(&self, sigma2: f64) -> &RelayParams {
        self.snapshot_for(sigma2)
            .map_or(&self.state.params, |s| &s.params)
    }

    pub fn snapshot_for(&self, sigma2: f64) -> Option<&StageSnapshot> {
        let target = sigma2.ln();
        self.snapshots.iter().min_by(|a, b| {
            let da = (a.sigma2.ln() - target).abs();
            let db = (b.sigma2.ln() - target).abs();
            da.total_cmp(&db)
        })
    }
}

/// Per-coordinate step scales: relay gains move relative to their input
/// level, receiver scales relative to their initial value, offsets by one.
fn step_scales(
    topology: &Topology,
    relay_power: &[f64],
    params: &RelayParams,
    rms: bool,
) -> Vec<f64> {
    let n = topology.relay_count();
    let m = topology.receivers;
    let mut scale = vec![1.0; 2 * (n + m)];
    if rms {
        for j in 0..n {
            if relay_power[j] > 0.0 {
                scale[j] = 1.0 / relay_power[j].sqrt();
            }
        }
    }
    for k in 0..m {
        let w = params.rx_scale[k].abs();
        if w > 0.0 {
            scale[n + k] = w;
        }
    }
    scale
}

fn stream_seed(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt
}

/// Trains the relays of `topology` up to the noise variance `target_sigma2`.
pub fn train(
    topology: &Topology,
    spec: &ModulationSpec,
    target_sigma2: f64,
    config: &TrainConfig,
    kind: ReceiverKind,
    seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    spec.validate()?;
    if topology.relay_count() == 0 {
        return Err(Error::Config("the network has no relays to train".into()));
    }
    if topology.receivers != spec.users {
        return Err(Error::Config(format!(
            "{} receivers for {} users",
            topology.receivers, spec.users
        )));
    }
    if !(target_sigma2 > 0.0 && target_sigma2.is_finite()) {
        return Err(Error::Config(
            "target noise variance must be positive".into(),
        ));
    }
    let net = Network::new(topology)?;
    let sigma2_start = config.sigma2_start.unwrap_or(target_sigma2 * 1e-3);
    let mut curriculum = Curriculum {
        sigma2: sigma2_start,
        factor: config.factor,
        threshold: config.threshold,
        stage: 0,
    };

    let init = initialize_detailed(
        topology,
        spec,
        sigma2_start.sqrt(),
        stream_seed(seed, 1),
        &config.init,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, 2));
    let k = config.loss.batch;
    let bits = BitFrame::random(spec, k, &mut rng);
    let symbols = bits.symbols(spec);
    let mut noise = NoiseBatch::sample(
        k,
        net.relays(),
        net.receivers(),
        sigma2_start.sqrt(),
        &mut rng,
    );

    let mut params = init.params.clone();
    let mut phi = params.to_vector();
    let mut adam = Adam::new(phi.len(), config.adam);
    if config.scale_steps {
        let rms = config.init.scaling == super::init::InitScaling::Rms;
        adam = adam.with_scale(step_scales(topology, &init.relay_power, &params, rms))?;
    }
    let mut history = Vec::new();
    let mut snapshots = Vec::new();
    let mut iter = 0usize;
    let stop = loop {
        let mut stage_iters = 0usize;
        let (ber, advanced) = loop {
            let batch = Batch {
                net: &net,
                bits: &bits,
                symbols: &symbols,
                noise: &noise,
                spec,
                kind,
                config: &config.loss,
            };
            let eval = match evaluate(&batch, &params) {
                Ok(e) => e,
                Err(Error::InvalidInput(_)) | Err(Error::NumericalOverflow { .. }) => {
                    return Err(Error::Divergence {
                        iteration: iter,
                        stage: curriculum.stage,
                    })
                }
                Err(e) => return Err(e),
            };
            if !eval.loss.total.is_finite() || !eval.gradient.iter().all(|g| g.is_finite()) {
                return Err(Error::Divergence {
                    iteration: iter,
                    stage: curriculum.stage,
                });
            }
            history.push(HistoryRow {
                stage: curriculum.stage,
                sigma2: curriculum.sigma2,
                iter,
                loss: eval.loss.total,
                ber_worst: eval.ber_worst,
            });
            if eval.ber_worst < curriculum.threshold {
                break (eval.ber_worst, true);
            }
            if stage_iters >= config.max_stage_iterations {
                break (eval.ber_worst, false);
            }
            adam.step(&mut phi, &eval.gradient)?;
            if !phi.iter().all(|v| v.is_finite()) {
                return Err(Error::Divergence {
                    iteration: iter,
                    stage: curriculum.stage,
                });
            }
            params = RelayParams::from_vector(topology, &phi)?;
            iter += 1;
            stage_iters += 1;
        };
        snapshots.push(StageSnapshot {
            stage: curriculum.stage,
            sigma2: curriculum.sigma2,
            iterations: stage_iters,
            ber_worst: ber,
            params: params.clone(),
        });
        log::debug!(
            "stage {} sigma2 {:e}: {} iterations, batch ber {}",
            curriculum.stage,
            curriculum.sigma2,
            stage_iters,
            ber
        );
        if !advanced {
            break StopReason::StageIterations;
        }
        curriculum.observe(ber);
        if curriculum.sigma2 > target_sigma2 {
            break StopReason::TargetReached;
        }
        if curriculum.stage >= config.max_stages {
            break StopReason::StageLimit;
        }
        noise = if config.fresh_noise_per_stage {
            NoiseBatch::sample(
                k,
                net.relays(),
                net.receivers(),
                curriculum.sigma2.sqrt(),
                &mut rng,
            )
        } else {
            noise.with_sigma(curriculum.sigma2.sqrt())
        };
    };
    Ok(TrainOutcome {
        state: TrainState {
            params,
            adam,
            curriculum,
            history,
        },
        snapshots,
        stop,
    })
}
