use super::{output_loss, DenseLayer, DropoutLayer, LossKind, Parameterized, Rng};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum MlpLayer {
    Dense(DenseLayer),
    Dropout(DropoutLayer),
}

/// Feed-forward stack of dense and dropout layers ending in a dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<MlpLayer>,
    input_dim: usize,
}

#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// Input seen by each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each dense layer (empty for dropout).
    pre: Vec<Vec<f64>>,
    /// Dropout masks (empty in inference mode or for dense layers).
    masks: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl MlpTrace {
    pub fn output_pre(&self) -> &[f64] {
        self.pre.last().unwrap()
    }

    /// Activation entering layer `i` (the network input for `i = 0`).
    pub fn layer_input(&self, i: usize) -> &[f64] {
        &self.inputs[i]
    }
}

impl Mlp {
    pub fn new(layers: Vec<MlpLayer>) -> Result<Self> {
        let Some(MlpLayer::Dense(last)) = layers.last() else {
            return Err(Error::Shape("mlp must end with a dense layer".into()));
        };
        let _ = last;
        let mut width = None;
        let mut input_dim = None;
        for (i, layer) in layers.iter().enumerate() {
            if let MlpLayer::Dense(d) = layer {
                if let Some(w) = width {
                    if w != d.inputs {
                        return Err(Error::Shape(format!(
                            "layer {i} (dense {}→{}) cannot follow a layer producing {w} values",
                            d.inputs, d.outputs
                        )));
                    }
                }
                input_dim.get_or_insert(d.inputs);
                width = Some(d.outputs);
            }
        }
        Ok(Mlp {
            input_dim: input_dim.unwrap(),
            layers,
        })
    }

    pub fn layers(&self) -> &[MlpLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_layer(&self) -> &DenseLayer {
        match self.layers.last() {
            Some(MlpLayer::Dense(d)) => d,
            _ => unreachable!("validated in Mlp::new"),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.output_layer().outputs
    }

    /// Forward pass; dropout is active only when `rng` is given.
    pub fn forward(&self, x: &[f64], mut rng: Option<&mut Rng>) -> Result<MlpTrace> {
        if x.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "network expects input of length {}, got {}",
                self.input_dim,
                x.len()
            )));
        }
        let n = self.layers.len();
        let mut trace = MlpTrace {
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
            output: Vec::new(),
        };
        let mut current = x.to_vec();
        for layer in &self.layers {
            match layer {
                MlpLayer::Dense(d) => {
                    let (pre, out) = d.forward(&current)?;
                    trace.inputs.push(std::mem::replace(&mut current, out));
                    trace.pre.push(pre);
                    trace.masks.push(Vec::new());
                }
                MlpLayer::Dropout(drop) => {
                    let mask = match rng.as_deref_mut() {
                        Some(r) => drop.mask(current.len(), r),
                        None => Vec::new(),
                    };
                    let out: Vec<f64> = if mask.is_empty() {
                        current.clone()
                    } else {
                        current.iter().zip(&mask).map(|(a, m)| a * m).collect()
                    };
                    trace.inputs.push(std::mem::replace(&mut current, out));
                    trace.pre.push(Vec::new());
                    trace.masks.push(mask);
                }
            }
        }
        trace.output = current;
        Ok(trace)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x, None)?.output)
    }

    /// Backpropagates dL/dz of the output layer; accumulates `scale ·` grads
    /// (layout of `params()`) and returns dL/dx.
    pub fn backward(
        &self,
        trace: &MlpTrace,
        d_output_pre: &[f64],
        grads: &mut [Vec<f64>],
        scale: f64,
    ) -> Vec<f64> {
        let mut group = grads.len();
        let mut dz = d_output_pre.to_vec();
        let mut last_dense = true;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            match layer {
                MlpLayer::Dense(d) => {
                    if !last_dense {
                        // dz currently holds dL/dy of this layer
                        dz = d.activation.backprop(&trace.pre[i], &trace.inputs[i + 1], &dz);
                    }
                    last_dense = false;
                    group -= 2;
                    let (gw, rest) = grads[group..].split_at_mut(1);
                    dz = d.backward(&trace.inputs[i], &dz, &mut gw[0], &mut rest[0], scale);
                }
                MlpLayer::Dropout(_) => {
                    if !trace.masks[i].is_empty() {
                        dz.iter_mut().zip(&trace.masks[i]).for_each(|(g, m)| *g *= m);
                    }
                }
            }
        }
        dz
    }

    /// Forward, loss and backward for one sample. Returns (loss, trace, dL/dx).
    pub fn loss_and_grad(
        &self,
        x: &[f64],
        target: &[f64],
        loss: LossKind,
        rng: Option<&mut Rng>,
        grads: &mut [Vec<f64>],
        scale: f64,
    ) -> Result<(f64, MlpTrace, Vec<f64>)> {
        let trace = self.forward(x, rng)?;
        if target.len() != trace.output.len() {
            return Err(Error::Shape(format!(
                "target has length {}, network output has {}",
                target.len(),
                trace.output.len()
            )));
        }
        let (value, delta) = output_loss(
            self.output_layer().activation,
            loss,
            trace.output_pre(),
            &trace.output,
            target,
        );
        let dx = self.backward(&trace, &delta, grads, scale);
        Ok((value * scale, trace, dx))
    }
}

impl Parameterized for Mlp {
    fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                MlpLayer::Dense(d) => Some([&d.weights[..], &d.bias[..]]),
                MlpLayer::Dropout(_) => None,
            })
            .flatten()
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                MlpLayer::Dense(d) => Some([&mut d.weights[..], &mut d.bias[..]]),
                MlpLayer::Dropout(_) => None,
            })
            .flatten()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{rng_from_seed, Activation};

    fn net(rate: f64) -> Mlp {
        let mut rng = rng_from_seed(11);
        Mlp::new(vec![
            MlpLayer::Dense(DenseLayer::new(4, 6, Activation::Relu, &mut rng)),
            MlpLayer::Dropout(DropoutLayer::new(rate).unwrap()),
            MlpLayer::Dense(DenseLayer::new(6, 2, Activation::Softmax, &mut rng)),
        ])
        .unwrap()
    }

    #[test]
    fn shape_mismatch_names_layer() {
        let mut rng = rng_from_seed(1);
        let err = Mlp::new(vec![
            MlpLayer::Dense(DenseLayer::new(4, 6, Activation::Relu, &mut rng)),
            MlpLayer::Dense(DenseLayer::new(5, 2, Activation::Softmax, &mut rng)),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");
        assert!(Mlp::new(vec![MlpLayer::Dropout(DropoutLayer::new(0.1).unwrap())]).is_err());
    }

    #[test]
    fn zero_rate_training_equals_inference() {
        let m = net(0.0);
        let x = [0.3, -0.1, 0.8, 1.2];
        let mut rng = rng_from_seed(0);
        let train = m.forward(&x, Some(&mut rng)).unwrap().output;
        assert_eq!(train, m.predict(&x).unwrap());
    }

    #[test]
    fn doubling_the_loss_doubles_gradients() {
        let m = net(0.3);
        let x = [0.3, -0.1, 0.8, 1.2];
        let t = [0.0, 1.0];
        let mut g1 = m.zero_grads();
        let mut g2 = m.zero_grads();
        m.loss_and_grad(&x, &t, LossKind::CategoricalCrossEntropy, Some(&mut rng_from_seed(3)), &mut g1, 1.0)
            .unwrap();
        m.loss_and_grad(&x, &t, LossKind::CategoricalCrossEntropy, Some(&mut rng_from_seed(3)), &mut g2, 2.0)
            .unwrap();
        for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn rejects_wrong_target_length() {
        let m = net(0.0);
        let mut g = m.zero_grads();
        assert!(m
            .loss_and_grad(&[0.0; 4], &[1.0], LossKind::CategoricalCrossEntropy, None, &mut g, 1.0)
            .is_err());
    }
}
