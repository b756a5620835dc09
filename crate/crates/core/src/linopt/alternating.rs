//! Layer-by-layer max-min weighted SNR with weight balancing across users.

use serde::{Deserialize, Serialize};

use super::extended::ExtendedLinearModel;
use super::penalty::{evaluate_pv, PenaltySettings, Target};
use super::subproblem::{assemble_subproblem, SubproblemData};
use crate::deepopt::{initialize, InitConfig, InitScaling};
use crate::error::{check_len, Error, Result};
use crate::model::{propagate, Network, NoiseBatch, RelayParams, Topology, Transfer};
use crate::modem::{pam_bit_error_probability, symbol_power, ModulationSpec};

/// Relative slack on the power cap when accepting a solution.
pub const POWER_SLACK: f64 = 1e-6;

/// How the receiver scale of the linear design is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverFit {
    /// One over the slope of the linear model.
    LinearSlope,
    /// Least-squares unit slope of the noiseless saturating network over the
    /// constellation points.
    Constellation,
    /// Per user, the scale that keeps the noiseless saturating outputs
    /// farthest from that user's decision thresholds (least squares on ties).
    #[default]
    Margin,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub p_max: f64,
    /// Weight balancing rounds (1 disables balancing).
    pub zeta_rounds: usize,
    /// Stop balancing once max/min user BER is within this ratio.
    pub balance_ratio: f64,
    /// Stop the layer sweeps when the weighted SNR improves by less than this
    /// (relative) over a sweep.
    pub sweep_tolerance: f64,
    pub max_sweeps: usize,
    /// Relative bracket width ending the bisection on the SNR target.
    pub eta_tolerance: f64,
    /// Seed of the randomized starting point.
    pub init_seed: u64,
    pub receiver_fit: ReceiverFit,
    #[serde(skip)]
    pub penalty: PenaltySettings,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            p_max: 0.64,
            zeta_rounds: 10,
            balance_ratio: 1.5,
            sweep_tolerance: 1e-3,
            max_sweeps: 50,
            eta_tolerance: 1e-3,
            init_seed: 0,
            receiver_fit: ReceiverFit::default(),
            penalty: PenaltySettings::default(),
        }
    }
}

/// Result of maximizing the weighted SNR over one layer.
#[derive(Clone, Debug)]
pub struct LayerStep {
    pub eta: f64,
    pub gains: Vec<f64>,
    pub max_power: f64,
    pub evaluations: usize,
    /// Largest rank ratio among accepted evaluations.
    pub rank_ratio: f64,
    /// Every accepted evaluation's penalty history.
    pub histories: Vec<Vec<(f64, Vec<f64>)>>,
}

fn weighted_min(snr: &[f64], zeta: &[f64]) -> f64 {
    snr.iter()
        .zip(zeta)
        .map(|(s, z)| s * z)
        .fold(f64::INFINITY, f64::min)
}

/// Largest weighted SNR target whose min-max power over layer `v` stays
/// within `p_max`, found by doubling then bisection. Never returns a worse
/// point than the current gains of the layer.
pub fn max_eta(
    model: &ExtendedLinearModel,
    v: usize,
    zeta: &[f64],
    p_max: f64,
    config: &LinearConfig,
) -> Result<LayerStep> {
    check_len("weights", model.receivers(), zeta.len())?;
    let data = assemble_subproblem(model, v)?;
    let cap = p_max * (1.0 + POWER_SLACK);
    let off = vec![0.0; data.layer_size()];
    let floor = data.powers_for(&off)?.into_iter().fold(0.0, f64::max);
    let current = model.layer_gains(v);
    let current_power = data.powers_for(&current)?.into_iter().fold(0.0, f64::max);
    // Switching the layer off is not always feasible: downstream relays may
    // lose a term that was cancelling part of their input.
    let start = if current_power <= cap {
        (current, current_power)
    } else if floor <= cap {
        (off, floor)
    } else {
        return Err(Error::Infeasible(format!(
            "relay powers exceed the cap at the current gains and with layer {v} switched off"
        )));
    };
    let mut best = LayerStep {
        eta: weighted_min(&data.snrs_for(&start.0)?, zeta),
        gains: start.0,
        max_power: start.1,
        evaluations: 0,
        rank_ratio: 0.0,
        histories: Vec::new(),
    };
    let mut evaluations = 0;
    let mut attempt = |eta: f64, best: &mut LayerStep| -> Result<bool> {
        evaluations += 1;
        let target = Target { eta, zeta, p_max };
        match evaluate_pv(&data, &target, &best.gains, &config.penalty) {
            Ok(res) => {
                let achieved = weighted_min(&res.snr, zeta);
                let ok = res.power <= cap && achieved >= eta * (1.0 - 1e-4);
                if res.power <= cap && achieved > best.eta {
                    best.eta = achieved;
                    best.gains = res.gains;
                    best.max_power = res.power;
                    best.rank_ratio = best.rank_ratio.max(res.rank_ratio);
                    best.histories.push(res.history);
                }
                Ok(ok)
            }
            Err(Error::Infeasible(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };
    let mut lo = best.eta.max(0.0);
    let mut hi = if lo > 0.0 { 2.0 * lo } else { 1e-3 };
    let mut doublings = 0;
    while attempt(hi, &mut best)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 80 {
            return Err(Error::Internal(
                "weighted SNR target grew without bound".into(),
            ));
        }
    }
    while hi - lo > config.eta_tolerance * lo.max(1e-12) {
        let mid = 0.5 * (lo + hi);
        if attempt(mid, &mut best)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if lo == 0.0 && hi < 1e-12 {
            break;
        }
    }
    best.evaluations = evaluations;
    Ok(best)
}

/// One row of the optimization log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub round: usize,
    pub sweep: usize,
    pub layer: usize,
    pub eta: f64,
    pub max_power: f64,
}

#[derive(Clone, Debug)]
pub struct LinearSolution {
    pub params: RelayParams,
    pub snr: Vec<f64>,
    /// Analytic worst-bit error probability of every user.
    pub user_ber: Vec<f64>,
    pub zeta: Vec<f64>,
    /// Max-min weighted SNR reached in the returned round.
    pub eta: f64,
    pub powers: Vec<f64>,
    pub log: Vec<SweepRecord>,
    /// Weighted min SNR after each sweep, per balancing round.
    pub sweep_etas: Vec<Vec<f64>>,
    /// Penalty histories of accepted evaluations.
    pub histories: Vec<Vec<(f64, Vec<f64>)>>,
    pub max_rank_ratio: f64,
}

/// Worst-bit error probability of every user for unit-slope receivers.
pub fn user_bers(spec: &ModulationSpec, snr: &[f64]) -> Vec<f64> {
    let sigma_s2 = symbol_power(spec);
    snr.iter()
        .enumerate()
        .map(|(m, &s)| {
            if s <= 0.0 {
                return 0.5;
            }
            let std = (sigma_s2 / s).sqrt();
            (0..spec.bits)
                .map(|b| pam_bit_error_probability(spec, m, b, std))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Scales every gain by the largest common factor keeping all relay powers
/// within `p_max`.
pub fn feasible_start(model: &mut ExtendedLinearModel, p_max: f64) -> Result<()> {
    let base = model.gains();
    let powers_at = |model: &mut ExtendedLinearModel, c: f64| -> Result<f64> {
        let scaled: Vec<Vec<f64>> = base
            .iter()
            .map(|l| l.iter().map(|g| g * c).collect())
            .collect();
        model.set_gains(&scaled)?;
        Ok(model.relay_powers().into_iter().fold(0.0, f64::max))
    };
    if powers_at(model, 0.0)? > p_max {
        return Err(Error::Infeasible(
            "relay powers exceed the cap with all gains off".into(),
        ));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while powers_at(model, hi)? <= p_max {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if powers_at(model, mid)? <= p_max {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    powers_at(model, lo)?;
    Ok(())
}

/// Alternating per-layer maximization of the max-min weighted SNR, with the
/// user weights rebalanced between rounds to equalize user BERs.
pub fn optimize(
    topology: &Topology,
    spec: &ModulationSpec,
    sigma2: f64,
    config: &LinearConfig,
) -> Result<LinearSolution> {
    spec.validate()?;
    if topology.relay_count() == 0 {
        return Err(Error::Config(
            "the network has no relays to optimize".into(),
        ));
    }
    if topology.receivers != spec.users {
        return Err(Error::Config(format!(
            "{} receivers for {} users",
            topology.receivers, spec.users
        )));
    }
    let sigma_s2 = symbol_power(spec);
    let init = initialize(
        topology,
        spec,
        sigma2.sqrt(),
        config.init_seed,
        &InitConfig {
            scaling: InitScaling::Power,
            ..InitConfig::default()
        },
    )?;
    let mut model = ExtendedLinearModel::new(topology, &init, sigma2, sigma_s2)?;
    feasible_start(&mut model, config.p_max)?;

    let users = spec.users;
    let mut zeta = vec![1.0; users];
    let mut log = Vec::new();
    let mut best: Option<LinearSolution> = None;
    let mut all_sweeps = Vec::new();
    let mut histories = Vec::new();
    let mut max_rank_ratio: f64 = 0.0;
    for round in 0..config.zeta_rounds.max(1) {
        let mut eta = weighted_min(&model.snrs(), &zeta);
        let mut sweeps = vec![eta];
        for sweep in 0..config.max_sweeps {
            for v in 0..model.layers() {
                let step = max_eta(&model, v, &zeta, config.p_max, config)?;
                model.set_layer_gains(v, &step.gains)?;
                max_rank_ratio = max_rank_ratio.max(step.rank_ratio);
                histories.extend(step.histories);
                log.push(SweepRecord {
                    round,
                    sweep,
                    layer: v,
                    eta: step.eta,
                    max_power: model.relay_powers().into_iter().fold(0.0, f64::max),
                });
            }
            let next = weighted_min(&model.snrs(), &zeta);
            sweeps.push(next);
            let improved = next - eta;
            eta = next;
            if improved <= config.sweep_tolerance * eta.abs().max(1e-300) || model.layers() == 1 {
                break;
            }
        }
        all_sweeps.push(sweeps);
        let snr = model.snrs();
        let bers = user_bers(spec, &snr);
        let worst = bers.iter().copied().fold(0.0, f64::max);
        let candidate = LinearSolution {
            params: receiver_fit(topology, spec, &model, config.receiver_fit)?,
            snr: snr.clone(),
            user_ber: bers.clone(),
            zeta: zeta.clone(),
            eta,
            powers: model.relay_powers(),
            log: Vec::new(),
            sweep_etas: Vec::new(),
            histories: Vec::new(),
            max_rank_ratio: 0.0,
        };
        let better = best.as_ref().is_none_or(|b| {
            worst < b.user_ber.iter().copied().fold(0.0, f64::max)
        });
        if better {
            best = Some(candidate);
        }
        let least = bers.iter().copied().fold(f64::INFINITY, f64::min);
        if users == 1 || worst < 1e-12 || worst <= config.balance_ratio * least {
            break;
        }
        zeta = rebalance(&zeta, &bers);
    }
    let mut out = best.ok_or_else(|| Error::Internal("no balancing round ran".into()))?;
    out.log = log;
    out.sweep_etas = all_sweeps;
    out.histories = histories;
    out.max_rank_ratio = max_rank_ratio;
    Ok(out)
}

/// Multiplicative weight update: users with a higher BER get a smaller
/// weight, which raises the SNR they must reach at a given target.
pub fn rebalance(zeta: &[f64], bers: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = bers.iter().map(|b| b.clamp(1e-300, 0.5).ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let raw: Vec<f64> = zeta
        .iter()
        .zip(&logs)
        .map(|(z, l)| z * (l / mean))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|z| z * zeta.len() as f64 / total).collect()
}

/// Gains of the model plus unit-slope receiver scaling and zero biases.
fn receiver_fit(
    topology: &Topology,
    spec: &ModulationSpec,
    model: &ExtendedLinearModel,
    fit: ReceiverFit,
) -> Result<RelayParams> {
    let mut params = RelayParams::zeros(topology);
    params.gains = model.gains();
    let scales: Vec<f64> = match fit {
        ReceiverFit::LinearSlope => (0..model.receivers()).map(|m| inverse(model.slope(m))).collect(),
        ReceiverFit::Constellation | ReceiverFit::Margin => {
            let net = Network::new(topology)?;
            let pts = spec.constellation();
            let noise = NoiseBatch::zeros(pts.len(), net.relays(), net.receivers());
            let trace = propagate(
                &net,
                &params.flat_gains(),
                &params.flat_biases(),
                &pts,
                &noise,
                Transfer::Tanh,
            )?;
            let energy: f64 = pts.iter().map(|s| s * s).sum();
            (0..model.receivers())
                .map(|m| {
                    let r: Vec<f64> = (0..pts.len()).map(|k| trace.received(k)[m]).collect();
                    let slope = r.iter().zip(&pts).map(|(r, s)| r * s).sum::<f64>() / energy;
                    match fit {
                        ReceiverFit::Margin => margin_scale(spec, m, &r, slope),
                        _ => inverse(slope),
                    }
                })
                .collect()
        }
    };
    for (m, scale) in scales.into_iter().enumerate() {
        params.rx_scale[m] = scale;
        params.rx_bias[m] = 0.0;
    }
    Ok(params)
}

fn inverse(slope: f64) -> f64 {
    if slope != 0.0 {
        1.0 / slope
    } else {
        1.0
    }
}

/// Decision interval `(lo, hi)` of every constellation point for user `m`:
/// the midpoints to the nearest neighbours carrying different bits of `m`.
fn decision_intervals(spec: &ModulationSpec, m: usize) -> Vec<(f64, f64)> {
    let pts = spec.constellation();
    let user = |a: usize| spec.symbol_bits(a)[m * spec.bits..(m + 1) * spec.bits].to_vec();
    let cuts: Vec<f64> = (1..pts.len())
        .filter(|&a| user(a) != user(a - 1))
        .map(|a| 0.5 * (pts[a - 1] + pts[a]))
        .collect();
    pts.iter()
        .map(|&x| {
            let lo = cuts.iter().copied().filter(|&t| t < x).fold(f64::NEG_INFINITY, f64::max);
            let hi = cuts.iter().copied().filter(|&t| t > x).fold(f64::INFINITY, f64::min);
            (lo, hi)
        })
        .collect()
}

/// Receiver scale `1/u` maximizing the smallest distance between the
/// received points `r` and the thresholds `u * t` of user `m`. The margin is
/// a minimum of functions linear in `u`, hence concave: ternary search.
fn margin_scale(spec: &ModulationSpec, m: usize, r: &[f64], slope: f64) -> f64 {
    if slope == 0.0 {
        return 1.0;
    }
    let sign = slope.signum();
    let intervals = decision_intervals(spec, m);
    let margin = |u: f64| {
        r.iter()
            .zip(&intervals)
            .map(|(&rk, &(lo, hi))| {
                let rk = sign * rk;
                let below = if lo.is_finite() { rk - lo * u } else { f64::INFINITY };
                let above = if hi.is_finite() { hi * u - rk } else { f64::INFINITY };
                below.min(above)
            })
            .fold(f64::INFINITY, f64::min)
    };
    let ls = slope.abs();
    let (mut a, mut b) = (0.0, 4.0 * ls);
    for _ in 0..200 {
        let x1 = a + (b - a) / 3.0;
        let x2 = b - (b - a) / 3.0;
        if margin(x1) < margin(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    let u = 0.5 * (a + b);
    let best = margin(u);
    if best <= 0.0 || margin(ls) >= best - 1e-12 * best.abs().max(1.0) {
        inverse(slope)
    } else {
        sign / u
    }
}

/// Per-layer data for the current model, exposed for diagnostics.
pub fn layer_data(model: &ExtendedLinearModel, v: usize) -> Result<SubproblemData> {
    assemble_subproblem(model, v)
}
