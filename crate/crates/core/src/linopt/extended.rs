//! Extended-vector description of the linearized network.
//!
//! The extended output after layer `i` stacks the transmitted symbol and the
//! outputs of every relay up to layer `i`: `[s, o_0, ..., o_i]`, so position
//! `1 + j` holds relay `j` (global order). One layer maps the extended
//! vector through `diag(w~_i) F~_i`, where `F~_i` copies the earlier entries
//! and appends the new layer inputs, and `w~_i` is one on copied entries and
//! the relay gains on new ones.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::model::{Network, RelayParams, Topology};

#[derive(Clone, Debug)]
pub struct ExtendedLinearModel {
    net: Network,
    /// `F~_i`, `(1 + n_{i+1}) x (1 + n_i)` with `n_i` relays before layer `i`.
    tilde_f: Vec<DMatrix<f64>>,
    /// `w~_i`, length `1 + n_{i+1}`.
    tilde_w: Vec<DVector<f64>>,
    /// `g~_m`, length `1 + N`.
    tilde_g: Vec<DVector<f64>>,
    /// `prod[u][e - u]` is the product of `diag(w~_i) F~_i` for `u <= i < e`,
    /// later layers on the left; the empty product is the identity.
    prod: Vec<Vec<DMatrix<f64>>>,
    pub sigma_s2: f64,
    pub sigma2: f64,
}

impl ExtendedLinearModel {
    /// Builds the model for the relay gains of `params`. Biases are ignored:
    /// the linear model never uses them.
    pub fn new(
        topology: &Topology,
        params: &RelayParams,
        sigma2: f64,
        sigma_s2: f64,
    ) -> Result<Self> {
        params.validate(topology)?;
        if !(sigma2 > 0.0) || !(sigma_s2 > 0.0) {
            return Err(Error::InvalidInput(
                "noise and symbol power must be positive".into(),
            ));
        }
        let net = Network::new(topology)?;
        let d = net.layers();
        let total = net.relays();
        let mut tilde_f = Vec::with_capacity(d);
        let mut tilde_w = Vec::with_capacity(d);
        for i in 0..d {
            let before = net.offset(i);
            let upto = net.offset(i + 1);
            let mut f = DMatrix::zeros(1 + upto, 1 + before);
            for k in 0..=before {
                f[(k, k)] = 1.0;
            }
            for a in 0..net.layer_size(i) {
                let row = 1 + before + a;
                f[(row, 0)] = topology.bs_gains[i][a];
                for (l, block) in topology.relay_gains[i].iter().enumerate() {
                    for (b, &g) in block[a].iter().enumerate() {
                        f[(row, 1 + net.offset(l) + b)] = g;
                    }
                }
            }
            tilde_f.push(f);
            let mut w = DVector::from_element(1 + upto, 1.0);
            for (a, &g) in params.gains[i].iter().enumerate() {
                w[1 + before + a] = g;
            }
            tilde_w.push(w);
        }
        let tilde_g = (0..net.receivers())
            .map(|m| {
                let mut g = DVector::zeros(1 + total);
                for i in 0..d {
                    for (a, &v) in topology.rx_gains[i][m].iter().enumerate() {
                        g[1 + net.offset(i) + a] = v;
                    }
                }
                g
            })
            .collect();
        let mut model = Self {
            net,
            tilde_f,
            tilde_w,
            tilde_g,
            prod: Vec::new(),
            sigma_s2,
            sigma2,
        };
        model.rebuild_products();
        Ok(model)
    }

    fn layer_map(&self, i: usize) -> DMatrix<f64> {
        let mut m = self.tilde_f[i].clone();
        for (r, &w) in self.tilde_w[i].iter().enumerate() {
            m.row_mut(r).scale_mut(w);
        }
        m
    }

    fn rebuild_products(&mut self) {
        let d = self.layers();
        let maps: Vec<DMatrix<f64>> = (0..d).map(|i| self.layer_map(i)).collect();
        self.prod = (0..=d)
            .map(|u| {
                let mut row = vec![DMatrix::identity(
                    1 + self.net.offset(u),
                    1 + self.net.offset(u),
                )];
                for e in u + 1..=d {
                    let next = &maps[e - 1] * row.last().unwrap();
                    row.push(next);
                }
                row
            })
            .collect();
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn layers(&self) -> usize {
        self.net.layers()
    }

    pub fn relays(&self) -> usize {
        self.net.relays()
    }

    pub fn receivers(&self) -> usize {
        self.net.receivers()
    }

    /// Relays before layer `i` (the paper's cumulative count of layer `i - 1`).
    pub fn cumulative(&self, i: usize) -> usize {
        self.net.offset(i)
    }

    pub fn tilde_f(&self, i: usize) -> &DMatrix<f64> {
        &self.tilde_f[i]
    }

    pub fn tilde_w(&self, i: usize) -> &DVector<f64> {
        &self.tilde_w[i]
    }

    pub fn tilde_g(&self, m: usize) -> &DVector<f64> {
        &self.tilde_g[m]
    }

    /// Selection matrix `C~_i = [0; I]`, `(1 + n_{i+1}) x N_i`.
    pub fn tilde_c(&self, i: usize) -> DMatrix<f64> {
        let ni = self.net.layer_size(i);
        let before = self.net.offset(i);
        let mut c = DMatrix::zeros(1 + before + ni, ni);
        for a in 0..ni {
            c[(1 + before + a, a)] = 1.0;
        }
        c
    }

    /// Product of the layer maps `u <= i < e` (identity when `u == e`).
    pub fn product(&self, u: usize, e: usize) -> &DMatrix<f64> {
        &self.prod[u][e - u]
    }

    pub fn layer_gains(&self, i: usize) -> Vec<f64> {
        let before = self.net.offset(i);
        self.tilde_w[i].as_slice()[1 + before..].to_vec()
    }

    pub fn gains(&self) -> Vec<Vec<f64>> {
        (0..self.layers()).map(|i| self.layer_gains(i)).collect()
    }

    /// Replaces the gains of layer `v` and refreshes every cached product
    /// that contains that layer.
    pub fn set_layer_gains(&mut self, v: usize, gains: &[f64]) -> Result<()> {
        check_len("layer gains", self.net.layer_size(v), gains.len())?;
        if !gains.iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidInput("non-finite relay gain".into()));
        }
        let before = self.net.offset(v);
        for (a, &g) in gains.iter().enumerate() {
            self.tilde_w[v][1 + before + a] = g;
        }
        let map = self.layer_map(v);
        let d = self.layers();
        for u in 0..=v {
            let inner = &map * &self.prod[u][v - u];
            for e in v + 1..=d {
                let updated = &self.prod[v + 1][e - v - 1] * &inner;
                self.prod[u][e - u] = updated;
            }
        }
        Ok(())
    }

    pub fn set_gains(&mut self, gains: &[Vec<f64>]) -> Result<()> {
        check_len("gain layers", self.layers(), gains.len())?;
        for (v, g) in gains.iter().enumerate() {
            self.set_layer_gains(v, g)?;
        }
        Ok(())
    }

    /// Signal coefficient and noise energy (in units of sigma^2) seen through
    /// the row vector `probe` applied to the full extended output.
    pub fn response(&self, probe: &DVector<f64>) -> (f64, f64) {
        let d = self.layers();
        let signal = (probe.transpose() * self.product(0, d))[(0, 0)];
        let mut noise = 0.0;
        for u in 0..d {
            let row = probe.transpose() * self.product(u + 1, d);
            let before = self.net.offset(u);
            for a in 0..self.net.layer_size(u) {
                let v = row[1 + before + a] * self.tilde_w[u][1 + before + a];
                noise += v * v;
            }
        }
        (signal, noise)
    }

    /// End-to-end noiseless slope from the symbol to receiver `m`.
    pub fn slope(&self, m: usize) -> f64 {
        self.response(&self.tilde_g[m]).0
    }

    pub fn snr(&self, m: usize) -> f64 {
        let (signal, noise) = self.response(&self.tilde_g[m]);
        signal * signal * self.sigma_s2 / self.sigma2 / (1.0 + noise)
    }

    pub fn snrs(&self) -> Vec<f64> {
        (0..self.receivers()).map(|m| self.snr(m)).collect()
    }

    /// Mean output power of relay `j` (global index).
    pub fn relay_power(&self, j: usize) -> f64 {
        let mut e = DVector::zeros(1 + self.relays());
        e[1 + j] = 1.0;
        let (signal, noise) = self.response(&e);
        signal * signal * self.sigma_s2 + self.sigma2 * noise
    }

    pub fn relay_powers(&self) -> Vec<f64> {
        (0..self.relays()).map(|j| self.relay_power(j)).collect()
    }

    /// Receiver noise energy relative to sigma^2: the SNR denominator.
    pub fn noise_term(&self, m: usize) -> f64 {
        1.0 + self.response(&self.tilde_g[m]).1
    }
}

/// Mean relay output powers of linear relays, via the closed form.
pub fn relay_power_closed_form(
    topology: &Topology,
    params: &RelayParams,
    sigma2: f64,
    sigma_s2: f64,
) -> Result<Vec<f64>> {
    Ok(ExtendedLinearModel::new(topology, params, sigma2, sigma_s2)?.relay_powers())
}

/// Per-receiver SNR of linear relays, via the closed form.
pub fn snr_closed_form(
    topology: &Topology,
    params: &RelayParams,
    sigma2: f64,
    sigma_s2: f64,
) -> Result<Vec<f64>> {
    Ok(ExtendedLinearModel::new(topology, params, sigma2, sigma_s2)?.snrs())
}
