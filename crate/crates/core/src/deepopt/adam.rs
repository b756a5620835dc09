use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

fn default_lr() -> f64 {
    1e-2
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::Config("invalid ADAM hyperparameters".into()));
        }
        Ok(())
    }
}

/// Bias-corrected ADAM moments.
///
/// An optional per-coordinate `scale` multiplies each step, which lets
/// parameters with very different natural magnitudes share one learning
/// rate. With no scale this is the textbook update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub scale: Option<Vec<f64>>,
}

impl Adam {
    pub fn new(dim: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
            scale: None,
        }
    }

    pub fn with_scale(mut self, scale: Vec<f64>) -> Result<Self> {
        check_len("step scale", self.m.len(), scale.len())?;
        if !scale.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::InvalidInput(
                "step scales must be positive and finite".into(),
            ));
        }
        self.scale = Some(scale);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    /// One update of `params` against `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        check_len("parameters", self.dim(), params.len())?;
        check_len("gradient", self.dim(), grad.len())?;
        let c = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g;
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[k] / bias1;
            let v_hat = self.v[k] / bias2;
            let s = self.scale.as_ref().map_or(1.0, |s| s[k]);
            params[k] -= c.learning_rate * s * m_hat / (v_hat.sqrt() + c.epsilon);
        }
        Ok(())
    }
}

/// Functional form of [`Adam::step`].
pub fn adam_step(state: &Adam, params: &[f64], grad: &[f64]) -> Result<(Adam, Vec<f64>)> {
    let mut next = state.clone();
    let mut p = params.to_vec();
    next.step(&mut p, grad)?;
    Ok((next, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut opt = Adam::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 0.5];
        for _ in 0..10 {
            opt.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(opt.step, 10);
    }

    #[test]
    fn constant_gradient_moves_at_the_learning_rate() {
        let mut opt = Adam::new(2, AdamConfig::default());
        let mut p = vec![0.0, 0.0];
        let mut last = p.clone();
        for _ in 0..200 {
            opt.step(&mut p, &[3.0, -0.2]).unwrap();
            let d0 = last[0] - p[0];
            let d1 = p[1] - last[1];
            assert!((d0 - 1e-2).abs() < 1e-8, "{d0}");
            assert!((d1 - 1e-2).abs() < 1e-7, "{d1}");
            last = p.clone();
        }
    }

    #[test]
    fn scale_multiplies_the_step() {
        let mut opt = Adam::new(1, AdamConfig::default())
            .with_scale(vec![4.0])
            .unwrap();
        let mut p = vec![0.0];
        opt.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] + 4e-2).abs() < 1e-8);
    }

    #[test]
    fn functional_step_is_deterministic() {
        let s = Adam::new(2, AdamConfig::default());
        let a = adam_step(&s, &[1.0, 2.0], &[0.3, -0.7]).unwrap();
        let b = adam_step(&s, &[1.0, 2.0], &[0.3, -0.7]).unwrap();
        assert_eq!(a, b);
        assert!(adam_step(&s, &[1.0], &[0.3, -0.7]).is_err());
    }
}
