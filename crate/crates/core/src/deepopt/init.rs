//! Relay initialization that keeps every relay near its linear regime.
//!
//! Layers are set one at a time. The average input power of each relay is
//! estimated on a probe batch pushed through the already initialized earlier
//! layers, then the gain is a random amplitude in `[0.5, 1]` with a random
//! sign, divided by that power (or by its square root).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{propagate, Network, NoiseBatch, RelayParams, Topology, Transfer};
use crate::modem::{BitFrame, ModulationSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScaling {
    /// `w = a s / p`. Overdrives relays whose input power is well below one.
    Power,
    /// `w = a s / sqrt(p)`: unit-scale pre-activations whatever the path loss.
    #[default]
    Rms,
}

fn default_probe() -> usize {
    4096
}
fn default_disconnect() -> f64 {
    1e-12
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    #[serde(default)]
    pub scaling: InitScaling,
    #[serde(default = "default_probe")]
    pub probe: usize,
    /// Set receiver scales to `1 / rms(r_m)` instead of one.
    #[serde(default)]
    pub normalize_receivers: bool,
    /// Relays whose input power is below this are left at zero gain.
    #[serde(default = "default_disconnect")]
    pub disconnect_threshold: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            scaling: InitScaling::Rms,
            probe: default_probe(),
            normalize_receivers: false,
            disconnect_threshold: default_disconnect(),
        }
    }
}

impl InitConfig {
    /// Settings for path-loss scaled networks, where powers are tiny.
    pub fn spatial() -> Self {
        Self {
            normalize_receivers: true,
            disconnect_threshold: 1e-300,
            ..Self::default()
        }
    }
}

/// Initial parameters with the probe statistics they were derived from.
#[derive(Clone, Debug)]
pub struct Initialization {
    pub params: RelayParams,
    /// Estimated input power of every relay (global order).
    pub relay_power: Vec<f64>,
    /// RMS of every received signal after initialization.
    pub rx_rms: Vec<f64>,
}

pub fn initialize(
    topology: &Topology,
    spec: &ModulationSpec,
    sigma: f64,
    seed: u64,
    config: &InitConfig,
) -> Result<RelayParams> {
    Ok(initialize_detailed(topology, spec, sigma, seed, config)?.params)
}

pub fn initialize_detailed(
    topology: &Topology,
    spec: &ModulationSpec,
    sigma: f64,
    seed: u64,
    config: &InitConfig,
) -> Result<Initialization> {
    if config.probe == 0 {
        return Err(Error::Config("initialization probe batch is empty".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("noise std {sigma} is invalid")));
    }
    let net = Network::new(topology)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = BitFrame::random(spec, config.probe, &mut rng);
    let symbols = bits.symbols(spec);
    let noise = NoiseBatch::sample(config.probe, net.relays(), net.receivers(), sigma, &mut rng);
    let mut params = RelayParams::zeros(topology);
    let mut relay_power = vec![0.0; net.relays()];
    for i in 0..net.layers() {
        let trace = propagate(
            &net,
            &params.flat_gains(),
            &params.flat_biases(),
            &symbols,
            &noise,
            Transfer::Tanh,
        )?;
        let start = net.offset(i);
        for a in 0..net.layer_size(i) {
            let j = start + a;
            let p = (0..config.probe)
                .map(|k| trace.inputs(k)[j].powi(2))
                .sum::<f64>()
                / config.probe as f64;
            relay_power[j] = p;
            let amplitude = rng.random_range(0.5..=1.0);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            params.gains[i][a] = if p < config.disconnect_threshold {
                log::warn!("relay {a} of layer {i} has input power {p:e}; left disconnected");
                0.0
            } else {
                match config.scaling {
                    InitScaling::Power => amplitude * sign / p,
                    InitScaling::Rms => amplitude * sign / p.sqrt(),
                }
            };
        }
    }
    let trace = propagate(
        &net,
        &params.flat_gains(),
        &params.flat_biases(),
        &symbols,
        &noise,
        Transfer::Tanh,
    )?;
    let rx_rms: Vec<f64> = (0..net.receivers())
        .map(|m| {
            ((0..config.probe)
                .map(|k| trace.received(k)[m].powi(2))
                .sum::<f64>()
                / config.probe as f64)
                .sqrt()
        })
        .collect();
    if config.normalize_receivers {
        for (scale, &rms) in params.rx_scale.iter_mut().zip(&rx_rms) {
            if rms > 0.0 {
                *scale = 1.0 / rms;
            }
        }
    }
    Ok(Initialization {
        params,
        relay_power,
        rx_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_relay_unit_power() {
        let mut t = Topology::zeros(&[1], 1);
        t.bs_gains[0] = vec![1.0];
        t.rx_gains[0][0] = vec![1.0];
        let spec = ModulationSpec::new(1, 1).unwrap();
        for seed in 0..20 {
            let init = initialize_detailed(&t, &spec, 0.0, seed, &InitConfig::default()).unwrap();
            assert!((init.relay_power[0] - 1.0).abs() < 1e-15);
            let w = init.params.gains[0][0].abs();
            assert!((0.5..=1.0).contains(&w));
            assert_eq!(init.params.biases[0][0], 0.0);
            assert_eq!(init.params.rx_scale[0], 1.0);
        }
    }

    #[test]
    fn silent_relay_is_disconnected() {
        let mut t = Topology::zeros(&[2], 1);
        t.bs_gains[0] = vec![1.0, 0.0];
        let spec = ModulationSpec::new(1, 1).unwrap();
        let p = initialize(&t, &spec, 0.0, 3, &InitConfig::default()).unwrap();
        assert_eq!(p.gains[0][1], 0.0);
        assert!(p.gains[0][0] != 0.0);
    }
}
