//! Cascade amplify-and-forward network model.
//!
//! Relays are grouped into layers; a relay of layer `i` hears the base
//! station and every relay of the layers before it, and applies
//! `tanh(w * y + b)` to its received signal. Receivers hear relay outputs
//! only (plus an optional direct base-station link used by the no-relay
//! reference network).
//!
//! Indexing is zero-based throughout. Relays also carry a *global* index
//! that enumerates layer 0 first, then layer 1, and so on; flat parameter
//! and noise vectors use that order.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Channel gains of a layered (cascade) relay network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Relay count of every layer.
    pub layer_sizes: Vec<usize>,
    /// Number of receivers.
    pub receivers: usize,
    /// Base station to relay gains, one vector per layer.
    pub bs_gains: Vec<Vec<f64>>,
    /// `relay_gains[i][l]` holds the rows of the matrix from layer `l` to
    /// layer `i` (`layer_sizes[i]` rows of `layer_sizes[l]` entries), `l < i`.
    pub relay_gains: Vec<Vec<Vec<Vec<f64>>>>,
    /// `rx_gains[i][m]` is the gain vector from layer `i` to receiver `m`.
    pub rx_gains: Vec<Vec<Vec<f64>>>,
    /// Direct base station to receiver gains. Only the no-relay reference
    /// network sets this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_gains: Option<Vec<f64>>,
}

impl Topology {
    /// All-zero gains for the given shape.
    pub fn zeros(layer_sizes: &[usize], receivers: usize) -> Self {
        let bs_gains = layer_sizes.iter().map(|&n| vec![0.0; n]).collect();
        let relay_gains = layer_sizes
            .iter()
            .enumerate()
            .map(|(i, &ni)| {
                (0..i)
                    .map(|l| vec![vec![0.0; layer_sizes[l]]; ni])
                    .collect()
            })
            .collect();
        let rx_gains = layer_sizes
            .iter()
            .map(|&n| vec![vec![0.0; n]; receivers])
            .collect();
        Self {
            layer_sizes: layer_sizes.to_vec(),
            receivers,
            bs_gains,
            relay_gains,
            rx_gains,
            direct_gains: None,
        }
    }

    pub fn layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn relay_count(&self) -> usize {
        self.layer_sizes.iter().sum()
    }

    /// Checks shapes and finiteness of every gain.
    pub fn validate(&self) -> Result<()> {
        let d = self.layers();
        if self.receivers == 0 {
            return Err(Error::Config("topology needs at least one receiver".into()));
        }
        check_len("bs_gains layers", d, self.bs_gains.len())?;
        check_len("relay_gains layers", d, self.relay_gains.len())?;
        check_len("rx_gains layers", d, self.rx_gains.len())?;
        for (i, &ni) in self.layer_sizes.iter().enumerate() {
            check_len(&format!("bs_gains[{i}]"), ni, self.bs_gains[i].len())?;
            check_len(&format!("relay_gains[{i}]"), i, self.relay_gains[i].len())?;
            for (l, block) in self.relay_gains[i].iter().enumerate() {
                check_len(&format!("relay_gains[{i}][{l}] rows"), ni, block.len())?;
                for row in block {
                    check_len(
                        &format!("relay_gains[{i}][{l}] columns"),
                        self.layer_sizes[l],
                        row.len(),
                    )?;
                }
            }
            check_len(
                &format!("rx_gains[{i}]"),
                self.receivers,
                self.rx_gains[i].len(),
            )?;
            for g in &self.rx_gains[i] {
                check_len(&format!("rx_gains[{i}][m]"), ni, g.len())?;
            }
        }
        if let Some(direct) = &self.direct_gains {
            check_len("direct_gains", self.receivers, direct.len())?;
        }
        let all_finite = self.bs_gains.iter().flatten().all(|v| v.is_finite())
            && self
                .relay_gains
                .iter()
                .flatten()
                .flatten()
                .flatten()
                .all(|v| v.is_finite())
            && self
                .rx_gains
                .iter()
                .flatten()
                .flatten()
                .all(|v| v.is_finite())
            && self.direct_gains.iter().flatten().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Config("topology contains non-finite gains".into()));
        }
        Ok(())
    }
}

/// A validated topology laid out for fast propagation.
#[derive(Clone, Debug)]
pub struct Network {
    topology: Topology,
    offsets: Vec<usize>,
    bs: Vec<f64>,
    /// Per layer, row-major `N_i x offsets[i]` matrix of incoming relay gains.
    incoming: Vec<Vec<f64>>,
    /// Per receiver, gains from every relay (global order).
    rx: Vec<Vec<f64>>,
    direct: Vec<f64>,
}

impl Network {
    pub fn new(topology: &Topology) -> Result<Self> {
        topology.validate()?;
        let d = topology.layers();
        let mut offsets = Vec::with_capacity(d + 1);
        let mut acc = 0;
        offsets.push(0);
        for &n in &topology.layer_sizes {
            acc += n;
            offsets.push(acc);
        }
        let bs = topology.bs_gains.iter().flatten().copied().collect();
        let incoming = (0..d)
            .map(|i| {
                let ni = topology.layer_sizes[i];
                let width = offsets[i];
                let mut mat = vec![0.0; ni * width];
                for (l, block) in topology.relay_gains[i].iter().enumerate() {
                    for (a, row) in block.iter().enumerate() {
                        let dst = &mut mat[a * width + offsets[l]..a * width + offsets[l + 1]];
                        dst.copy_from_slice(row);
                    }
                }
                mat
            })
            .collect();
        let rx = (0..topology.receivers)
            .map(|m| {
                (0..d)
                    .flat_map(|i| topology.rx_gains[i][m].iter().copied())
                    .collect()
            })
            .collect();
        let direct = topology
            .direct_gains
            .clone()
            .unwrap_or_else(|| vec![0.0; topology.receivers]);
        Ok(Self {
            topology: topology.clone(),
            offsets,
            bs,
            incoming,
            rx,
            direct,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn layers(&self) -> usize {
        self.topology.layers()
    }

    pub fn layer_size(&self, i: usize) -> usize {
        self.topology.layer_sizes[i]
    }

    /// Global index of the first relay of layer `i` (equals the number of
    /// relays in layers before `i`).
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn relays(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn receivers(&self) -> usize {
        self.topology.receivers
    }

    /// `(layer, index within layer)` of a global relay index.
    pub fn locate(&self, relay: usize) -> (usize, usize) {
        let layer = self.offsets[1..].iter().position(|&o| relay < o).unwrap();
        (layer, relay - self.offsets[layer])
    }

    pub(crate) fn bs_gains(&self) -> &[f64] {
        &self.bs
    }

    pub(crate) fn incoming(&self, i: usize) -> &[f64] {
        &self.incoming[i]
    }

    pub(crate) fn rx_row(&self, m: usize) -> &[f64] {
        &self.rx[m]
    }

    pub(crate) fn direct(&self) -> &[f64] {
        &self.direct
    }
}

/// Trainable relay and receiver parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelayParams {
    /// Relay gains, one vector per layer.
    pub gains: Vec<Vec<f64>>,
    /// Relay biases (added before the saturation), one vector per layer.
    pub biases: Vec<Vec<f64>>,
    /// Receiver scaling factors.
    pub rx_scale: Vec<f64>,
    /// Receiver offsets.
    pub rx_bias: Vec<f64>,
}

impl RelayParams {
    pub fn zeros(topology: &Topology) -> Self {
        let per_layer: Vec<Vec<f64>> = topology.layer_sizes.iter().map(|&n| vec![0.0; n]).collect();
        Self {
            gains: per_layer.clone(),
            biases: per_layer,
            rx_scale: vec![1.0; topology.receivers],
            rx_bias: vec![0.0; topology.receivers],
        }
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        check_len("gain layers", topology.layers(), self.gains.len())?;
        check_len("bias layers", topology.layers(), self.biases.len())?;
        for (i, &n) in topology.layer_sizes.iter().enumerate() {
            check_len(&format!("gains[{i}]"), n, self.gains[i].len())?;
            check_len(&format!("biases[{i}]"), n, self.biases[i].len())?;
        }
        check_len("rx_scale", topology.receivers, self.rx_scale.len())?;
        check_len("rx_bias", topology.receivers, self.rx_bias.len())?;
        if !self.to_vector().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "parameters contain non-finite values".into(),
            ));
        }
        Ok(())
    }

    pub fn flat_gains(&self) -> Vec<f64> {
        self.gains.iter().flatten().copied().collect()
    }

    pub fn flat_biases(&self) -> Vec<f64> {
        self.biases.iter().flatten().copied().collect()
    }

    /// Parameter vector ordered as relay gains, receiver scales, relay
    /// biases, receiver offsets.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.flat_gains();
        v.extend_from_slice(&self.rx_scale);
        v.extend(self.flat_biases());
        v.extend_from_slice(&self.rx_bias);
        v
    }

    /// Inverse of [`RelayParams::to_vector`].
    pub fn from_vector(topology: &Topology, phi: &[f64]) -> Result<Self> {
        let n = topology.relay_count();
        let m = topology.receivers;
        check_len("parameter vector", 2 * (n + m), phi.len())?;
        let split = |flat: &[f64]| -> Vec<Vec<f64>> {
            let mut out = Vec::with_capacity(topology.layers());
            let mut at = 0;
            for &size in &topology.layer_sizes {
                out.push(flat[at..at + size].to_vec());
                at += size;
            }
            out
        };
        Ok(Self {
            gains: split(&phi[..n]),
            rx_scale: phi[n..n + m].to_vec(),
            biases: split(&phi[n + m..2 * n + m]),
            rx_bias: phi[2 * n + m..].to_vec(),
        })
    }
}

/// Fixed unit-variance noise draws for one batch.
///
/// Draws are stored unscaled; `sigma` multiplies them at use time so that a
/// curriculum can reuse the same draws at every noise level.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseBatch {
    len: usize,
    relays: usize,
    receivers: usize,
    relay_noise: Vec<f64>,
    rx_noise: Vec<f64>,
    pub sigma: f64,
}

impl NoiseBatch {
    pub fn sample<R: Rng + ?Sized>(
        len: usize,
        relays: usize,
        receivers: usize,
        sigma: f64,
        rng: &mut R,
    ) -> Self {
        let relay_noise = (0..len * relays)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let rx_noise = (0..len * receivers)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        Self {
            len,
            relays,
            receivers,
            relay_noise,
            rx_noise,
            sigma,
        }
    }

    pub fn zeros(len: usize, relays: usize, receivers: usize) -> Self {
        Self {
            len,
            relays,
            receivers,
            relay_noise: vec![0.0; len * relays],
            rx_noise: vec![0.0; len * receivers],
            sigma: 0.0,
        }
    }

    /// Builds a batch from explicit unit draws (row-major, one row per time step).
    pub fn from_draws(
        len: usize,
        relay_noise: Vec<f64>,
        rx_noise: Vec<f64>,
        sigma: f64,
    ) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidInput("empty noise batch".into()));
        }
        if !relay_noise.len().is_multiple_of(len) || !rx_noise.len().is_multiple_of(len) {
            return Err(Error::InvalidInput(
                "noise draws are not a whole number of rows".into(),
            ));
        }
        Ok(Self {
            len,
            relays: relay_noise.len() / len,
            receivers: rx_noise.len() / len,
            relay_noise,
            rx_noise,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn relays(&self) -> usize {
        self.relays
    }

    pub fn receivers(&self) -> usize {
        self.receivers
    }

    /// Unit draws of every relay at time step `k`.
    pub fn relay_draws(&self, k: usize) -> &[f64] {
        &self.relay_noise[k * self.relays..(k + 1) * self.relays]
    }

    /// Unit draws of every receiver at time step `k`.
    pub fn rx_draws(&self, k: usize) -> &[f64] {
        &self.rx_noise[k * self.receivers..(k + 1) * self.receivers]
    }

    pub fn relay_noise(&self) -> &[f64] {
        &self.relay_noise
    }

    pub fn rx_noise(&self) -> &[f64] {
        &self.rx_noise
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }
}

/// Every intermediate signal of a forward pass, row-major over time steps.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    len: usize,
    relays: usize,
    receivers: usize,
    pub y: Vec<f64>,
    pub o: Vec<f64>,
    pub r: Vec<f64>,
}

impl ForwardTrace {
    fn with_shape(len: usize, relays: usize, receivers: usize) -> Self {
        Self {
            len,
            relays,
            receivers,
            y: vec![0.0; len * relays],
            o: vec![0.0; len * relays],
            r: vec![0.0; len * receivers],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Relay inputs of all relays at time step `k` (global relay order).
    pub fn inputs(&self, k: usize) -> &[f64] {
        &self.y[k * self.relays..(k + 1) * self.relays]
    }

    /// Relay outputs of all relays at time step `k`.
    pub fn outputs(&self, k: usize) -> &[f64] {
        &self.o[k * self.relays..(k + 1) * self.relays]
    }

    /// Received values of all receivers at time step `k`.
    pub fn received(&self, k: usize) -> &[f64] {
        &self.r[k * self.receivers..(k + 1) * self.receivers]
    }

    /// Input vector of layer `i` at time step `k`.
    pub fn layer_inputs<'a>(&'a self, net: &Network, i: usize, k: usize) -> &'a [f64] {
        &self.inputs(k)[net.offset(i)..net.offset(i + 1)]
    }

    /// Output vector of layer `i` at time step `k`.
    pub fn layer_outputs<'a>(&'a self, net: &Network, i: usize, k: usize) -> &'a [f64] {
        &self.outputs(k)[net.offset(i)..net.offset(i + 1)]
    }
}

/// Relay transfer characteristic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transfer {
    Tanh,
    Linear,
}

impl Transfer {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transfer::Tanh => x.tanh(),
            Transfer::Linear => x,
        }
    }
}

/// Input of layer `i` for one time step: `h_i s + sum_{l<i} F_{i,l} o_l + sigma n_i`.
///
/// `prior_outputs` holds the outputs of every relay of the layers before `i`
/// in global order; `noise_draws` the unit draws of the relays of layer `i`.
pub fn layer_input(
    net: &Network,
    i: usize,
    symbol: f64,
    prior_outputs: &[f64],
    noise_draws: &[f64],
    sigma: f64,
) -> Result<Vec<f64>> {
    if i >= net.layers() {
        return Err(Error::Config(format!("layer {i} does not exist")));
    }
    let ni = net.layer_size(i);
    let width = net.offset(i);
    check_len("prior outputs", width, prior_outputs.len())?;
    check_len("layer noise draws", ni, noise_draws.len())?;
    let h = &net.bs_gains()[width..width + ni];
    let inc = net.incoming(i);
    Ok((0..ni)
        .map(|a| {
            let row = &inc[a * width..(a + 1) * width];
            h[a] * symbol + dot(row, prior_outputs) + sigma * noise_draws[a]
        })
        .collect())
}

/// Relay outputs `tanh(w * y + b)`, elementwise.
pub fn relay_output(y: &[f64], w: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_len("relay gains", y.len(), w.len())?;
    check_len("relay biases", y.len(), b.len())?;
    Ok(y.iter()
        .zip(w)
        .zip(b)
        .map(|((&y, &w), &b)| (w * y + b).tanh())
        .collect())
}

/// Nonlinear (tanh) forward pass over a batch of transmitted symbols.
pub fn forward(
    net: &Network,
    params: &RelayParams,
    symbols: &[f64],
    noise: &NoiseBatch,
) -> Result<ForwardTrace> {
    params.validate(net.topology())?;
    propagate(
        net,
        &params.flat_gains(),
        &params.flat_biases(),
        symbols,
        noise,
        Transfer::Tanh,
    )
}

/// Forward pass with linear relays `o = w * y + b`.
pub fn forward_linear(
    net: &Network,
    params: &RelayParams,
    symbols: &[f64],
    noise: &NoiseBatch,
) -> Result<ForwardTrace> {
    params.validate(net.topology())?;
    propagate(
        net,
        &params.flat_gains(),
        &params.flat_biases(),
        symbols,
        noise,
        Transfer::Linear,
    )
}

/// Forward pass on flat (global-order) gain and bias slices.
pub fn propagate(
    net: &Network,
    gains: &[f64],
    biases: &[f64],
    symbols: &[f64],
    noise: &NoiseBatch,
    transfer: Transfer,
) -> Result<ForwardTrace> {
    let n = net.relays();
    let m = net.receivers();
    check_len("gains", n, gains.len())?;
    check_len("biases", n, biases.len())?;
    check_len("noise relays", n, noise.relays())?;
    check_len("noise receivers", m, noise.receivers())?;
    if noise.len() < symbols.len() {
        return Err(Error::Dimension {
            what: "noise batch length".into(),
            expected: symbols.len(),
            actual: noise.len(),
        });
    }
    let len = symbols.len();
    let sigma = noise.sigma;
    let mut trace = ForwardTrace::with_shape(len, n, m);
    let bs = net.bs_gains();
    for (k, &s) in symbols.iter().enumerate() {
        let draws = noise.relay_draws(k);
        let (y, o) = (
            &mut trace.y[k * n..(k + 1) * n],
            &mut trace.o[k * n..(k + 1) * n],
        );
        for i in 0..net.layers() {
            let start = net.offset(i);
            let width = start;
            let inc = net.incoming(i);
            for a in 0..net.layer_size(i) {
                let j = start + a;
                let row = &inc[a * width..(a + 1) * width];
                let yj = bs[j] * s + dot(row, &o[..width]) + sigma * draws[j];
                let oj = transfer.apply(gains[j] * yj + biases[j]);
                if !yj.is_finite() || !oj.is_finite() {
                    return Err(Error::NumericalOverflow { layer: i, index: a });
                }
                y[j] = yj;
                o[j] = oj;
            }
        }
        let rx_draws = noise.rx_draws(k);
        for mm in 0..m {
            let rv = dot(net.rx_row(mm), o) + net.direct()[mm] * s + sigma * rx_draws[mm];
            if !rv.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite received value at receiver {mm}"
                )));
            }
            trace.r[k * m + mm] = rv;
        }
    }
    Ok(trace)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
