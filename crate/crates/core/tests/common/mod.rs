//! Random networks shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaynet::model::{RelayParams, Topology};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fully connected cascade with `layers` layers of random sizes (at least
/// one relay each, `max_relays` in total) and gains uniform in `[-1, 1]`.
pub fn random_topology(
    rng: &mut ChaCha8Rng,
    layers: usize,
    max_relays: usize,
    receivers: usize,
) -> Topology {
    let total = rng.random_range(layers..=max_relays.max(layers));
    let mut sizes = vec![1; layers];
    for _ in layers..total {
        sizes[rng.random_range(0..layers)] += 1;
    }
    let mut t = Topology::zeros(&sizes, receivers);
    for i in 0..layers {
        for v in &mut t.bs_gains[i] {
            *v = rng.random_range(-1.0..1.0);
        }
        for l in 0..i {
            for row in &mut t.relay_gains[i][l] {
                for v in row.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
        }
        for m in 0..receivers {
            for v in &mut t.rx_gains[i][m] {
                *v = rng.random_range(-1.0..1.0);
            }
        }
    }
    t
}

/// Relay gains of magnitude in `[0.3, 1.2]` with random signs, zero biases.
pub fn random_gains(t: &Topology, rng: &mut ChaCha8Rng) -> RelayParams {
    let mut p = RelayParams::zeros(t);
    for layer in &mut p.gains {
        for w in layer.iter_mut() {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            *w = sign * rng.random_range(0.3..1.2);
        }
    }
    p
}

/// Random gains, biases and receiver scalings.
pub fn random_params(t: &Topology, rng: &mut ChaCha8Rng) -> RelayParams {
    let mut p = random_gains(t, rng);
    for layer in &mut p.biases {
        for b in layer.iter_mut() {
            *b = rng.random_range(-0.3..0.3);
        }
    }
    for m in 0..t.receivers {
        p.rx_scale[m] = rng.random_range(0.5..2.0);
        p.rx_bias[m] = rng.random_range(-0.2..0.2);
    }
    p
}

/// Derivative at zero by Ridders' extrapolation of central differences.
pub fn ridders(f: impl Fn(f64) -> f64) -> f64 {
    const CON: f64 = 1.4;
    const N: usize = 10;
    let mut table = [[0.0f64; N]; N];
    let mut h = 1e-3;
    let mut best = f64::NAN;
    let mut err = f64::INFINITY;
    table[0][0] = (f(h) - f(-h)) / (2.0 * h);
    for i in 1..N {
        h /= CON;
        table[0][i] = (f(h) - f(-h)) / (2.0 * h);
        let mut fac = CON * CON;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON * CON;
            let e = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    best
}
