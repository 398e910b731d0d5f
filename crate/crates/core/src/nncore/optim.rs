use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Stop after this many epochs without held-out improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 1,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be ≥ 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// SGD or Adam (β1 = 0.9, β2 = 0.999, ε = 1e-8, bias-corrected).
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: u64,
    group_scales: Vec<f64>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Optimizer {
            kind,
            learning_rate,
            step: 0,
            group_scales: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Per-group learning-rate multipliers; groups without an entry use 1.
    pub fn with_group_scales(mut self, scales: Vec<f64>) -> Self {
        self.group_scales = scales;
        self
    }

    fn group_lr(&self, group: usize) -> f64 {
        match self.group_scales.get(group) {
            Some(&s) => self.learning_rate * s,
            None => self.learning_rate,
        }
    }

    /// Applies one update. Any non-finite gradient aborts before touching parameters.
    pub fn step(&mut self, mut params: Vec<&mut [f64]>, grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len()
            || params.iter().zip(grads).any(|(p, g)| p.len() != g.len())
        {
            return Err(Error::Shape("optimizer: parameter/gradient layout mismatch".into()));
        }
        for (gi, g) in grads.iter().enumerate() {
            if let Some(k) = g.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient group {gi} index {k} is {}; training aborted",
                    g[k]
                )));
            }
        }
        let lrs: Vec<f64> = (0..grads.len()).map(|g| self.group_lr(g)).collect();
        match self.kind {
            OptimizerKind::Sgd => {
                for ((p, g), lr) in params.iter_mut().zip(grads).zip(&lrs) {
                    p.iter_mut().zip(g).for_each(|(w, d)| *w -= lr * d);
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.v = self.m.clone();
                }
                self.step += 1;
                let bc1 = 1.0 - BETA1.powi(self.step as i32);
                let bc2 = 1.0 - BETA2.powi(self.step as i32);
                for ((((p, g), m), v), &lr) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                    .zip(&lrs)
                {
                    for k in 0..g.len() {
                        m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
                        v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
                        let m_hat = m[k] / bc1;
                        let v_hat = v[k] / bc2;
                        p[k] -= lr * m_hat / (v_hat.sqrt() + EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_arithmetic() {
        let mut theta = vec![1.0];
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1);
        opt.step(vec![&mut theta], &[vec![2.0]]).unwrap();
        assert!((theta[0] - 0.8).abs() < 1e-15);
        let before = theta.clone();
        opt.step(vec![&mut theta], &[vec![0.0]]).unwrap();
        assert_eq!(theta, before);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // t=1: m̂ = g, v̂ = g², update = lr·g/(|g|+ε)
        let mut theta = vec![0.5, -2.0, 3.0];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 1e-3);
        opt.step(vec![&mut theta], &[vec![1.0; 3]]).unwrap();
        let expected = 1e-3 * 1.0 / (1.0 + 1e-8);
        for (new, old) in theta.iter().zip([0.5, -2.0, 3.0]) {
            assert!(((old - new) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_group_scale_freezes_group() {
        let mut a = vec![1.0, 2.0];
        let mut b = vec![3.0];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01).with_group_scales(vec![1.0, 0.0]);
        opt.step(vec![&mut a, &mut b], &[vec![0.5, 0.5], vec![0.7]]).unwrap();
        assert_eq!(b, vec![3.0]);
        assert!(a[0] < 1.0);
    }

    #[test]
    fn nan_gradient_aborts_without_update() {
        let mut theta = vec![1.0, 1.0];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1);
        let err = opt.step(vec![&mut theta], &[vec![0.1, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(theta, vec![1.0, 1.0]);
    }

    #[test]
    fn config_invariants() {
        let mut c = TrainConfig::default();
        c.validate().unwrap();
        c.epochs = 0;
        assert!(c.validate().is_err());
        let c = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
