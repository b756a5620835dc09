//! Monte-Carlo bit-error-rate evaluation with fresh noise.
//!
//! Symbols are processed in fixed-size chunks; chunk `c` draws its bits and
//! noise from its own ChaCha stream, so the result depends only on the seed
//! and never on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{propagate, Network, NoiseBatch, RelayParams, Topology, Transfer};
use crate::modem::{detect, BerReport, BitFrame, ErrorCounts, ModulationSpec, ReceiverKind};

fn default_chunk() -> usize {
    4096
}
fn default_round() -> usize {
    16
}
fn default_target_errors() -> u64 {
    100
}
fn default_max_symbols() -> u64 {
    1 << 22
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_chunk")]
    pub chunk: usize,
    /// Chunks evaluated between stopping checks.
    #[serde(default = "default_round")]
    pub round_chunks: usize,
    /// Stop once the worst bit has this many errors.
    #[serde(default = "default_target_errors")]
    pub target_errors: u64,
    #[serde(default = "default_max_symbols")]
    pub max_symbols: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            chunk: default_chunk(),
            round_chunks: default_round(),
            target_errors: default_target_errors(),
            max_symbols: default_max_symbols(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk == 0 || self.round_chunks == 0 || self.max_symbols == 0 {
            return Err(Error::Config("simulation sizes must be positive".into()));
        }
        Ok(())
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

struct Evaluator<'a> {
    net: Network,
    gains: Vec<f64>,
    biases: Vec<f64>,
    params: &'a RelayParams,
    spec: &'a ModulationSpec,
    kind: ReceiverKind,
    sigma: f64,
    transfer: Transfer,
}

impl Evaluator<'_> {
    fn chunk(&self, seed: u64, index: u64, len: usize) -> Result<ErrorCounts> {
        let mut rng = chunk_rng(seed, index);
        let bits = BitFrame::random(self.spec, len, &mut rng);
        let symbols = bits.symbols(self.spec);
        let noise = NoiseBatch::sample(
            len,
            self.net.relays(),
            self.net.receivers(),
            self.sigma,
            &mut rng,
        );
        let trace = propagate(
            &self.net,
            &self.gains,
            &self.biases,
            &symbols,
            &noise,
            self.transfer,
        )?;
        let mut counts = ErrorCounts::new(self.spec);
        let mut decided = Vec::with_capacity(self.spec.total_bits());
        for k in 0..len {
            decided.clear();
            let r = trace.received(k);
            for m in 0..self.spec.users {
                decided.extend(detect(
                    r[m],
                    self.params.rx_scale[m],
                    self.params.rx_bias[m],
                    m,
                    self.spec,
                    self.kind,
                ));
            }
            counts.record(&decided, bits.row(k));
        }
        Ok(counts)
    }
}

/// Estimates every per-bit error rate of a network at noise variance
/// `sigma2`, adding chunks until the worst bit has `target_errors` errors or
/// `max_symbols` symbols have been sent.
#[allow(clippy::too_many_arguments)]
pub fn simulate_ber(
    topology: &Topology,
    params: &RelayParams,
    spec: &ModulationSpec,
    kind: ReceiverKind,
    sigma2: f64,
    transfer: Transfer,
    seed: u64,
    config: &SimConfig,
) -> Result<BerReport> {
    config.validate()?;
    spec.validate()?;
    params.validate(topology)?;
    if topology.receivers != spec.users {
        return Err(Error::Config(format!(
            "{} receivers for {} users",
            topology.receivers, spec.users
        )));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise variance {sigma2} is invalid"
        )));
    }
    let eval = Evaluator {
        net: Network::new(topology)?,
        gains: params.flat_gains(),
        biases: params.flat_biases(),
        params,
        spec,
        kind,
        sigma: sigma2.sqrt(),
        transfer,
    };
    let chunk = config.chunk as u64;
    let mut total = ErrorCounts::new(spec);
    let mut next = 0u64;
    while total.trials < config.max_symbols {
        let jobs: Vec<(u64, usize)> = (0..config.round_chunks as u64)
            .map(|c| next + c)
            .map(|c| {
                let start = c * chunk;
                (
                    c,
                    (config.max_symbols.saturating_sub(start)).min(chunk) as usize,
                )
            })
            .filter(|&(_, len)| len > 0)
            .collect();
        next += config.round_chunks as u64;
        let parts: Vec<ErrorCounts> = jobs
            .par_iter()
            .map(|&(c, len)| eval.chunk(seed, c, len))
            .collect::<Result<_>>()?;
        for p in &parts {
            total.merge(p);
        }
        if total.errors.iter().copied().max().unwrap_or(0) >= config.target_errors {
            break;
        }
    }
    total.report()
}
