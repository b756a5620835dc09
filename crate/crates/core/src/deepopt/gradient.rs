//! Exact gradient of the batch loss by reverse-mode differentiation through
//! the receivers, the relay saturations and every relay-to-relay link.
//!
//! The batch is cut into fixed-size chunks that are processed in parallel;
//! partial sums are always combined in chunk order, so results do not depend
//! on the number of worker threads.

use rayon::prelude::*;

use super::loss::{bit_loss, boltzmann, soft_bits, LossConfig, LossValue};
use crate::error::{check_len, Error, Result};
use crate::model::{dot, Network, NoiseBatch, RelayParams};
use crate::modem::{decide, BitFrame, ModulationSpec, ReceiverKind};

/// Batch length handled by one parallel task.
pub const CHUNK: usize = 64;

/// Loss, gradient and training-batch error rate at one parameter point.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub loss: LossValue,
    /// Gradient in the parameter-vector order of [`RelayParams::to_vector`].
    pub gradient: Vec<f64>,
    /// Worst per-bit error rate of hard decisions on the batch.
    pub ber_worst: f64,
}

/// Problem data shared by every evaluation of a training run.
#[derive(Clone, Debug)]
pub struct Batch<'a> {
    pub net: &'a Network,
    pub bits: &'a BitFrame,
    pub symbols: &'a [f64],
    pub noise: &'a NoiseBatch,
    pub spec: &'a ModulationSpec,
    pub kind: ReceiverKind,
    pub config: &'a LossConfig,
}

struct ChunkForward {
    y: Vec<f64>,
    o: Vec<f64>,
    r: Vec<f64>,
    loss_sums: Vec<f64>,
    errors: Vec<u64>,
}

fn forward_chunk(
    batch: &Batch<'_>,
    gains: &[f64],
    biases: &[f64],
    params: &RelayParams,
    range: std::ops::Range<usize>,
) -> Result<ChunkForward> {
    let net = batch.net;
    let spec = batch.spec;
    let n = net.relays();
    let users = spec.users;
    let width = spec.total_bits();
    let len = range.len();
    let sigma = batch.noise.sigma;
    let mut out = ChunkForward {
        y: vec![0.0; len * n],
        o: vec![0.0; len * n],
        r: vec![0.0; len * users],
        loss_sums: vec![0.0; users],
        errors: vec![0; width],
    };
    let bs = net.bs_gains();
    let mut rbar = vec![0.0; users];
    let mut q = vec![0.0; width];
    let mut dq = vec![0.0; width];
    for (row, k) in range.enumerate() {
        let s = batch.symbols[k];
        let draws = batch.noise.relay_draws(k);
        let y = &mut out.y[row * n..(row + 1) * n];
        let o = &mut out.o[row * n..(row + 1) * n];
        for i in 0..net.layers() {
            let start = net.offset(i);
            let inc = net.incoming(i);
            for a in 0..net.layer_size(i) {
                let j = start + a;
                let yj = bs[j] * s
                    + dot(&inc[a * start..(a + 1) * start], &o[..start])
                    + sigma * draws[j];
                let oj = (gains[j] * yj + biases[j]).tanh();
                if !yj.is_finite() || !oj.is_finite() {
                    return Err(Error::NumericalOverflow { layer: i, index: a });
                }
                y[j] = yj;
                o[j] = oj;
            }
        }
        let rx = batch.noise.rx_draws(k);
        for m in 0..users {
            let r = dot(net.rx_row(m), o) + net.direct()[m] * s + sigma * rx[m];
            out.r[row * users + m] = r;
            rbar[m] = params.rx_scale[m] * r + params.rx_bias[m];
        }
        soft_bits(&rbar, spec, batch.kind, &mut q, &mut dq);
        for m in 0..users {
            for b in 0..spec.bits {
                let idx = m * spec.bits + b;
                let truth = batch.bits.get(k, m, b);
                out.loss_sums[m] += bit_loss(q[idx], truth, batch.config.beta).0;
                if decide(q[idx]) != truth {
                    out.errors[idx] += 1;
                }
            }
        }
    }
    Ok(out)
}

fn backward_chunk(
    batch: &Batch<'_>,
    gains: &[f64],
    params: &RelayParams,
    fwd: &ChunkForward,
    start_k: usize,
    user_weight: &[f64],
) -> Vec<f64> {
    let net = batch.net;
    let spec = batch.spec;
    let n = net.relays();
    let users = spec.users;
    let width = spec.total_bits();
    let mut grad = vec![0.0; 2 * (n + users)];
    let (gw, rest) = grad.split_at_mut(n);
    let (grx_w, rest) = rest.split_at_mut(users);
    let (gb, grx_b) = rest.split_at_mut(n);
    let mut rbar = vec![0.0; users];
    let mut q = vec![0.0; width];
    let mut dq = vec![0.0; width];
    let mut d_o = vec![0.0; n];
    let rows = fwd.r.len() / users;
    for row in 0..rows {
        let k = start_k + row;
        let y = &fwd.y[row * n..(row + 1) * n];
        let o = &fwd.o[row * n..(row + 1) * n];
        let r = &fwd.r[row * users..(row + 1) * users];
        for m in 0..users {
            rbar[m] = params.rx_scale[m] * r[m] + params.rx_bias[m];
        }
        soft_bits(&rbar, spec, batch.kind, &mut q, &mut dq);
        d_o.iter_mut().for_each(|v| *v = 0.0);
        for m in 0..users {
            let mut d_rbar = 0.0;
            for b in 0..spec.bits {
                let idx = m * spec.bits + b;
                let (_, dl) = bit_loss(q[idx], batch.bits.get(k, m, b), batch.config.beta);
                d_rbar += user_weight[m] * dl * dq[idx];
            }
            grx_w[m] += d_rbar * r[m];
            grx_b[m] += d_rbar;
            let d_r = d_rbar * params.rx_scale[m];
            for (acc, &g) in d_o.iter_mut().zip(net.rx_row(m)) {
                *acc += d_r * g;
            }
        }
        for i in (0..net.layers()).rev() {
            let start = net.offset(i);
            let inc = net.incoming(i);
            for a in (0..net.layer_size(i)).rev() {
                let j = start + a;
                let d_pre = d_o[j] * (1.0 - o[j] * o[j]);
                gw[j] += d_pre * y[j];
                gb[j] += d_pre;
                let d_y = d_pre * gains[j];
                if d_y != 0.0 {
                    let row_in = &inc[a * start..(a + 1) * start];
                    for (acc, &f) in d_o[..start].iter_mut().zip(row_in) {
                        *acc += d_y * f;
                    }
                }
            }
        }
    }
    grad
}

/// Loss, exact gradient and batch BER for the current parameters.
pub fn evaluate(batch: &Batch<'_>, params: &RelayParams) -> Result<Evaluation> {
    batch.config.validate()?;
    params.validate(batch.net.topology())?;
    let len = batch.symbols.len();
    if len == 0 {
        return Err(Error::InvalidInput("empty training batch".into()));
    }
    check_len("noise relays", batch.net.relays(), batch.noise.relays())?;
    check_len(
        "noise receivers",
        batch.net.receivers(),
        batch.noise.receivers(),
    )?;
    if batch.noise.len() < len || batch.bits.len() < len {
        return Err(Error::InvalidInput(
            "noise or bits shorter than the batch".into(),
        ));
    }
    let spec = batch.spec;
    let gains = params.flat_gains();
    let biases = params.flat_biases();
    let ranges: Vec<std::ops::Range<usize>> = (0..len)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(len))
        .collect();
    let forwards: Vec<ChunkForward> = ranges
        .par_iter()
        .map(|r| forward_chunk(batch, &gains, &biases, params, r.clone()))
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; spec.users];
    let mut errors = vec![0u64; spec.total_bits()];
    for f in &forwards {
        for (acc, v) in sums.iter_mut().zip(&f.loss_sums) {
            *acc += v;
        }
        for (acc, v) in errors.iter_mut().zip(&f.errors) {
            *acc += v;
        }
    }
    let norm = (spec.bits * len) as f64;
    let per_user: Vec<f64> = sums.iter().map(|s| s / norm).collect();
    let (total, dl_dm) = boltzmann(&per_user, batch.config.alpha);
    if !total.is_finite() {
        return Err(Error::InvalidInput("non-finite loss".into()));
    }
    let user_weight: Vec<f64> = dl_dm.iter().map(|w| w / norm).collect();
    let partials: Vec<Vec<f64>> = ranges
        .par_iter()
        .zip(forwards.par_iter())
        .map(|(r, f)| backward_chunk(batch, &gains, params, f, r.start, &user_weight))
        .collect();
    let mut gradient = vec![0.0; 2 * (batch.net.relays() + spec.users)];
    for p in &partials {
        for (acc, v) in gradient.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let ber_worst = errors.iter().copied().max().unwrap_or(0) as f64 / len as f64;
    Ok(Evaluation {
        loss: LossValue { total, per_user },
        gradient,
        ber_worst,
    })
}

/// Gradient of the batch loss with respect to the parameter vector.
pub fn gradient(batch: &Batch<'_>, params: &RelayParams) -> Result<Vec<f64>> {
    Ok(evaluate(batch, params)?.gradient)
}
