//! Per-layer quadratic forms of the SNR and power expressions.
//!
//! With the gains of every other layer fixed, each SNR numerator, SNR
//! denominator and relay power is a quadratic form in the extended gain
//! vector of layer `v`. The matrices are stored in reduced coordinates
//! `x = [x0, w_v]`: the leading entries of the extended vector are all equal
//! to one, so they collapse onto the single coordinate `x0` (the extended
//! vector is `R x` with `R = blockdiag(1, I)`). A quadratic form `S` of the
//! extended vector becomes `R' S R`.

use nalgebra::{DMatrix, DVector};

use super::extended::ExtendedLinearModel;
use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug)]
pub struct SubproblemData {
    pub layer: usize,
    /// Signal term over sigma^2 at each receiver (`Q_v(g~_m)`).
    pub signal: Vec<DMatrix<f64>>,
    /// Noise amplified by layers up to `v` at each receiver (`L_v(g~_m)`).
    pub noise: Vec<DMatrix<f64>>,
    /// Noise added after layer `v` at each receiver (`l_v(g~_m)`).
    pub noise_rest: Vec<f64>,
    /// Relay power forms over sigma^2 (`A_{v,j}`), every relay.
    pub power: Vec<DMatrix<f64>>,
    /// Constant power part over sigma^2 (`l_v(e_{j+1})`), every relay.
    pub power_rest: Vec<f64>,
    pub sigma2: f64,
    /// Global index of the first relay of layer `v`.
    pub first_relay: usize,
}

struct LayerContext<'a> {
    model: &'a ExtendedLinearModel,
    v: usize,
    before: usize,
    /// `F~_v` times the symbol path into layer `v`.
    symbol_path: DVector<f64>,
    /// Noise paths of every relay before layer `v`, scaled by its gain:
    /// column `j` is how relay `j`'s noise reaches the extended input of `v`.
    noise_paths: DMatrix<f64>,
}

impl<'a> LayerContext<'a> {
    fn new(model: &'a ExtendedLinearModel, v: usize) -> Self {
        let before = model.cumulative(v);
        let f = model.tilde_f(v);
        let symbol_path = (f * model.product(0, v)).column(0).into_owned();
        let mut noise_paths = DMatrix::zeros(f.nrows(), before);
        for u in 0..v {
            let through = f * model.product(u + 1, v);
            let start = model.cumulative(u);
            let w = model.tilde_w(u);
            for a in 0..model.cumulative(u + 1) - start {
                let col = through.column(1 + start + a) * w[1 + start + a];
                noise_paths.set_column(start + a, &col);
            }
        }
        Self {
            model,
            v,
            before,
            symbol_path,
            noise_paths,
        }
    }

    /// `R' diag(a) z` for a vector `z` in extended coordinates.
    fn reduce_vec(&self, a: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let nv = a.len() - 1 - self.before;
        let mut out = DVector::zeros(1 + nv);
        out[0] = (0..=self.before).map(|k| a[k] * z[k]).sum();
        for b in 0..nv {
            let k = 1 + self.before + b;
            out[1 + b] = a[k] * z[k];
        }
        out
    }

    fn reduce_mat(&self, a: &DVector<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
        let nv = a.len() - 1 - self.before;
        let mut out = DMatrix::zeros(1 + nv, z.ncols());
        for c in 0..z.ncols() {
            let col = z.column(c).into_owned();
            out.set_column(c, &self.reduce_vec(a, &col));
        }
        out
    }

    /// Reduced `(Q_v(g), L_v(g), l_v(g))` for a probe on the full extended
    /// output. `Q` is not yet multiplied by the symbol-to-noise ratio.
    fn forms(&self, probe: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, f64) {
        let model = self.model;
        let d = model.layers();
        let a = model.product(self.v + 1, d).transpose() * probe;
        let c = self.reduce_vec(&a, &self.symbol_path);
        let q = &c * c.transpose();
        let u = self.reduce_mat(&a, &self.noise_paths);
        let mut l = &u * u.transpose();
        let nv = a.len() - 1 - self.before;
        for b in 0..nv {
            let k = 1 + self.before + b;
            l[(1 + b, 1 + b)] += a[k] * a[k];
        }
        let mut rest = 0.0;
        for uu in self.v + 1..d {
            let row = model.product(uu + 1, d).transpose() * probe;
            let start = model.cumulative(uu);
            let w = model.tilde_w(uu);
            for j in start..model.cumulative(uu + 1) {
                let t = row[1 + j] * w[1 + j];
                rest += t * t;
            }
        }
        (q, l, rest)
    }
}

/// Builds the reduced per-layer matrices for layer `v`.
pub fn assemble_subproblem(model: &ExtendedLinearModel, v: usize) -> Result<SubproblemData> {
    if v >= model.layers() {
        return Err(Error::InvalidInput(format!("layer {v} does not exist")));
    }
    let ctx = LayerContext::new(model, v);
    let snr_scale = model.sigma_s2 / model.sigma2;
    let mut signal = Vec::new();
    let mut noise = Vec::new();
    let mut noise_rest = Vec::new();
    for m in 0..model.receivers() {
        let (q, l, rest) = ctx.forms(model.tilde_g(m));
        signal.push(q * snr_scale);
        noise.push(l);
        noise_rest.push(rest);
    }
    let mut power = Vec::new();
    let mut power_rest = Vec::new();
    let total = model.relays();
    for j in 0..total {
        let mut e = DVector::zeros(1 + total);
        e[1 + j] = 1.0;
        let (q, l, rest) = ctx.forms(&e);
        power.push(q * snr_scale + l);
        power_rest.push(rest);
    }
    Ok(SubproblemData {
        layer: v,
        signal,
        noise,
        noise_rest,
        power,
        power_rest,
        sigma2: model.sigma2,
        first_relay: ctx.before,
    })
}

impl SubproblemData {
    /// Size of the reduced variable `[x0, w_v]`.
    pub fn dim(&self) -> usize {
        self.signal
            .first()
            .or(self.power.first())
            .map_or(1, |m| m.nrows())
    }

    pub fn layer_size(&self) -> usize {
        self.dim() - 1
    }

    pub fn receivers(&self) -> usize {
        self.signal.len()
    }

    pub fn relays(&self) -> usize {
        self.power.len()
    }

    /// Reduced vector `[1, w_v]`.
    pub fn lift(&self, gains: &[f64]) -> Result<DVector<f64>> {
        check_len("layer gains", self.layer_size(), gains.len())?;
        let mut x = DVector::from_element(self.dim(), 1.0);
        x.rows_mut(1, gains.len()).copy_from_slice(gains);
        Ok(x)
    }

    /// `zeta Q - eta L`: the SNR constraint reads `<this, X> >= eta (1 + l)`.
    pub fn weighted_snr_form(&self, m: usize, eta: f64, zeta: f64) -> DMatrix<f64> {
        &self.signal[m] * zeta - &self.noise[m] * eta
    }

    /// `zeta Q / eta - L`: the constraint divided through by `eta` (> 0).
    pub fn b_matrix(&self, m: usize, eta: f64, zeta: f64) -> DMatrix<f64> {
        &self.signal[m] * (zeta / eta) - &self.noise[m]
    }

    pub fn power_of(&self, x: &DMatrix<f64>, j: usize) -> f64 {
        self.sigma2 * (self.power[j].dot(x) + self.power_rest[j])
    }

    /// Relay powers for rank-one gains of the layer.
    pub fn powers_for(&self, gains: &[f64]) -> Result<Vec<f64>> {
        let x = self.lift(gains)?;
        Ok((0..self.relays())
            .map(|j| self.sigma2 * (x.dot(&(&self.power[j] * &x)) + self.power_rest[j]))
            .collect())
    }

    /// Receiver SNRs for rank-one gains of the layer.
    pub fn snrs_for(&self, gains: &[f64]) -> Result<Vec<f64>> {
        let x = self.lift(gains)?;
        Ok((0..self.receivers())
            .map(|m| {
                let num = x.dot(&(&self.signal[m] * &x));
                let den = 1.0 + x.dot(&(&self.noise[m] * &x)) + self.noise_rest[m];
                num / den
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RelayParams, Topology};

    #[test]
    fn single_layer_has_no_downstream_noise() {
        let mut t = Topology::zeros(&[2], 1);
        t.bs_gains[0] = vec![1.0, 0.5];
        t.rx_gains[0][0] = vec![1.0, -1.0];
        let mut p = RelayParams::zeros(&t);
        p.gains[0] = vec![0.3, 0.8];
        let model = ExtendedLinearModel::new(&t, &p, 0.1, 1.0).unwrap();
        let data = assemble_subproblem(&model, 0).unwrap();
        assert_eq!(data.noise_rest, vec![0.0]);
        assert_eq!(data.dim(), 3);
        let snr = data.snrs_for(&[0.3, 0.8]).unwrap();
        assert!((snr[0] - model.snr(0)).abs() < 1e-12);
    }
}
