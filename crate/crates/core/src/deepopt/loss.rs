//! Batch loss: sigmoid soft bits, binary cross entropy in bits per user and
//! a Boltzmann-weighted combination across users.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForwardTrace, RelayParams};
use crate::modem::{fold, fold_derivative, scale, BitFrame, ModulationSpec, ReceiverKind};

fn default_beta() -> f64 {
    5.0
}
fn default_alpha() -> f64 {
    5.0
}
fn default_batch() -> usize {
    600
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Sigmoid sharpness.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Boltzmann temperature across users.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Training batch length.
    #[serde(default = "default_batch")]
    pub batch: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: default_beta(),
            alpha: default_alpha(),
            batch: default_batch(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.alpha >= 0.0) || self.batch == 0 {
            return Err(Error::Config(
                "loss needs beta > 0, alpha >= 0 and a nonempty batch".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub per_user: Vec<f64>,
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cross entropy (bits) of the soft bit `sigmoid(-beta q)` against `bit`,
/// and its derivative in `q`. A negative `q` means bit one, matching the
/// hard decision.
pub fn bit_loss(q: f64, bit: u8, beta: f64) -> (f64, f64) {
    let x = beta * q;
    let ln2 = std::f64::consts::LN_2;
    if bit == 1 {
        (softplus(x) / ln2, beta * sigmoid(x) / ln2)
    } else {
        (softplus(-x) / ln2, -beta * sigmoid(-x) / ln2)
    }
}

/// Boltzmann softmax `sum L_m e^{a L_m} / sum e^{a L_m}` and its partial
/// derivatives `p_m (1 + a (L_m - L))`.
pub fn boltzmann(values: &[f64], alpha: f64) -> (f64, Vec<f64>) {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = values.iter().map(|&v| (alpha * (v - top)).exp()).collect();
    let norm: f64 = weights.iter().sum();
    let p: Vec<f64> = weights.iter().map(|w| w / norm).collect();
    let combined: f64 = values.iter().zip(&p).map(|(v, p)| v * p).sum();
    let grad = values
        .iter()
        .zip(&p)
        .map(|(&v, &p)| p * (1.0 + alpha * (v - combined)))
        .collect();
    (combined, grad)
}

/// Soft values of every bit of one time step, plus `d q / d rbar` for each.
pub(crate) fn soft_bits(
    rbar: &[f64],
    spec: &ModulationSpec,
    kind: ReceiverKind,
    q: &mut [f64],
    dq: &mut [f64],
) {
    let pre = spec.prefactor();
    for m in 0..spec.users {
        let mut x = -pre * rbar[m];
        let mut deriv = -pre;
        let mut depth = 0;
        for b in 0..spec.bits {
            let z = spec.folds(m, b, kind);
            while depth < z {
                deriv *= fold_derivative(x, spec.epsilon);
                x = fold(x, spec.epsilon);
                depth += 1;
            }
            q[m * spec.bits + b] = x;
            dq[m * spec.bits + b] = deriv;
        }
    }
}

/// Batch loss of a forward trace.
pub fn loss(
    trace: &ForwardTrace,
    bits: &BitFrame,
    params: &RelayParams,
    spec: &ModulationSpec,
    config: &LossConfig,
    kind: ReceiverKind,
) -> Result<LossValue> {
    config.validate()?;
    let k_len = trace.len();
    if k_len == 0 || bits.len() < k_len {
        return Err(Error::InvalidInput(
            "loss needs a nonempty trace covered by the bits".into(),
        ));
    }
    let width = spec.total_bits();
    let mut sums = vec![0.0; spec.users];
    let mut rbar = vec![0.0; spec.users];
    let mut q = vec![0.0; width];
    let mut dq = vec![0.0; width];
    for k in 0..k_len {
        let r = trace.received(k);
        for m in 0..spec.users {
            rbar[m] = scale(r[m], params.rx_scale[m], params.rx_bias[m]);
        }
        soft_bits(&rbar, spec, kind, &mut q, &mut dq);
        for m in 0..spec.users {
            for b in 0..spec.bits {
                sums[m] += bit_loss(q[m * spec.bits + b], bits.get(k, m, b), config.beta).0;
            }
        }
    }
    let per_user: Vec<f64> = sums
        .iter()
        .map(|s| s / (spec.bits * k_len) as f64)
        .collect();
    let (total, _) = boltzmann(&per_user, config.alpha);
    Ok(LossValue { total, per_user })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_soft_values_cost_one_bit() {
        assert!((bit_loss(0.0, 0, 5.0).0 - 1.0).abs() < 1e-15);
        assert!((bit_loss(0.0, 1, 5.0).0 - 1.0).abs() < 1e-15);
        let (l, _) = boltzmann(&[1.0, 1.0, 1.0], 5.0);
        assert!((l - 1.0).abs() < 1e-15);
    }

    #[test]
    fn boltzmann_examples() {
        let (l, _) = boltzmann(&[0.0, 1.0], 5.0);
        let e5 = 5f64.exp();
        assert!((l - e5 / (1.0 + e5)).abs() < 1e-12);
        assert!((l - 0.99331).abs() < 5e-6);
        let (mean, _) = boltzmann(&[0.2, 0.4, 0.9], 0.0);
        assert!((mean - 0.5).abs() < 1e-15);
    }

    #[test]
    fn boltzmann_gradient_matches_differences() {
        let v = [0.3, 0.8];
        let (_, g) = boltzmann(&v, 5.0);
        for m in 0..2 {
            let h = 1e-6;
            let mut up = v;
            let mut dn = v;
            up[m] += h;
            dn[m] -= h;
            let fd = (boltzmann(&up, 5.0).0 - boltzmann(&dn, 5.0).0) / (2.0 * h);
            assert!((fd - g[m]).abs() < 1e-8, "{fd} vs {}", g[m]);
        }
    }

    #[test]
    fn confident_correct_bits_are_cheap() {
        assert!(bit_loss(-3.0, 1, 5.0).0 < 1e-6);
        assert!(bit_loss(3.0, 0, 5.0).0 < 1e-6);
        assert!(bit_loss(3.0, 1, 5.0).0 > 20.0);
        // Far into saturation the loss stays finite and linear.
        let (l, d) = bit_loss(1e3, 1, 5.0);
        assert!(l.is_finite() && (d - 5.0 / std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(softplus(800.0), 800.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
