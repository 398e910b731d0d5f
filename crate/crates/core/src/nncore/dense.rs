use serde::{Deserialize, Serialize};

use super::{glorot, sigmoid, Rng};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    Softmax,
    Identity,
}

impl Activation {
    pub fn apply(self, pre: &[f64], out: &mut [f64]) {
        match self {
            Activation::Sigmoid => out.iter_mut().zip(pre).for_each(|(y, &z)| *y = sigmoid(z)),
            Activation::Tanh => out.iter_mut().zip(pre).for_each(|(y, &z)| *y = z.tanh()),
            Activation::Relu => out.iter_mut().zip(pre).for_each(|(y, &z)| *y = z.max(0.0)),
            Activation::Identity => out.copy_from_slice(pre),
            Activation::Softmax => {
                let max = pre.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for (y, &z) in out.iter_mut().zip(pre) {
                    *y = (z - max).exp();
                    sum += *y;
                }
                out.iter_mut().for_each(|y| *y /= sum);
            }
        }
    }

    /// Vector-Jacobian product: maps dL/dy to dL/dz.
    pub fn backprop(self, pre: &[f64], out: &[f64], dy: &[f64]) -> Vec<f64> {
        match self {
            Activation::Sigmoid => out.iter().zip(dy).map(|(y, d)| d * y * (1.0 - y)).collect(),
            Activation::Tanh => out.iter().zip(dy).map(|(y, d)| d * (1.0 - y * y)).collect(),
            Activation::Relu => pre
                .iter()
                .zip(dy)
                .map(|(&z, &d)| if z > 0.0 { d } else { 0.0 })
                .collect(),
            Activation::Identity => dy.to_vec(),
            Activation::Softmax => {
                let dot: f64 = out.iter().zip(dy).map(|(y, d)| y * d).sum();
                out.iter().zip(dy).map(|(y, d)| y * (d - dot)).collect()
            }
        }
    }
}

/// Fully connected layer `y = f(W x + b)` with `W` stored row-major (`outputs × inputs`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, activation: Activation, rng: &mut Rng) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: glorot(rng, inputs, outputs, inputs * outputs),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn from_parts(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(Error::Shape(format!(
                "dense {inputs}→{outputs}: got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(DenseLayer {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        })
    }

    /// Returns (pre-activation, activation).
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.inputs {
            return Err(Error::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.inputs,
                x.len()
            )));
        }
        let pre: Vec<f64> = self
            .weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        let mut out = vec![0.0; self.outputs];
        self.activation.apply(&pre, &mut out);
        Ok((pre, out))
    }

    /// Accumulates `scale · dL/dW` and `scale · dL/db` given dL/dz, returning dL/dx.
    pub fn backward(
        &self,
        x: &[f64],
        dz: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        scale: f64,
    ) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs];
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &self.weights[r * self.inputs..(r + 1) * self.inputs];
            let grow = &mut grad_w[r * self.inputs..(r + 1) * self.inputs];
            let ds = d * scale;
            for k in 0..self.inputs {
                grow[k] += ds * x[k];
                dx[k] += d * row[k];
            }
            grad_b[r] += ds;
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layer_passes_input_through() {
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let layer = DenseLayer::from_parts(3, 3, w, vec![0.0; 3], Activation::Identity).unwrap();
        let x = [0.5, -2.0, 7.25];
        assert_eq!(layer.forward(&x).unwrap().1, x.to_vec());
        assert!(layer.forward(&[1.0]).is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = super::super::rng_from_seed(4);
        let layer = DenseLayer::new(5, 4, Activation::Softmax, &mut rng);
        let (_, y) = layer.forward(&[1.0, -3.0, 0.2, 9.0, 4.0]).unwrap();
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = super::super::rng_from_seed(1);
        let layer = DenseLayer::new(10, 6, Activation::Relu, &mut rng);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(layer.weights.iter().all(|w| w.abs() <= limit));
        assert!(layer.bias.iter().all(|&b| b == 0.0));
    }
}
