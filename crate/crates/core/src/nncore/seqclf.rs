use super::{
    output_loss, Activation, DenseLayer, DropoutLayer, LossKind, LstmLayer, LstmTrace, Parameterized, Rng,
};
use crate::error::Result;

/// LSTM → dropout on the final hidden state → dense head with one sigmoid unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceClassifier {
    pub lstm: LstmLayer,
    pub dropout: DropoutLayer,
    pub head: DenseLayer,
}

#[derive(Debug, Clone)]
pub struct SequenceTrace {
    pub lstm: LstmTrace,
    mask: Vec<f64>,
    head_input: Vec<f64>,
    /// Head pre-activation (logit).
    pub logit: Vec<f64>,
    pub probability: f64,
}

impl SequenceClassifier {
    pub fn new(input_dim: usize, hidden: usize, dropout_rate: f64, rng: &mut Rng) -> Result<Self> {
        let dropout = DropoutLayer::new(dropout_rate)?;
        let lstm = LstmLayer::new(input_dim, hidden, rng);
        let head = DenseLayer::new(hidden, 1, Activation::Sigmoid, rng);
        Ok(SequenceClassifier { lstm, dropout, head })
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        SequenceClassifier {
            lstm: LstmLayer::zeros(input_dim, hidden),
            dropout: DropoutLayer { rate: 0.0 },
            head: DenseLayer::zeros(hidden, 1, Activation::Sigmoid),
        }
    }

    pub fn forward(&self, columns: &[f64], effective_length: usize, rng: Option<&mut Rng>) -> Result<SequenceTrace> {
        let lstm = self.lstm.forward(columns, effective_length)?;
        let h = lstm.final_hidden();
        let mask = match rng {
            Some(r) => self.dropout.mask(h.len(), r),
            None => Vec::new(),
        };
        let head_input: Vec<f64> = if mask.is_empty() {
            h.to_vec()
        } else {
            h.iter().zip(&mask).map(|(a, m)| a * m).collect()
        };
        let (logit, out) = self.head.forward(&head_input)?;
        Ok(SequenceTrace {
            lstm,
            mask,
            head_input,
            logit,
            probability: out[0],
        })
    }

    /// Binary cross-entropy against `target` ∈ {0, 1}; accumulates
    /// `scale ·` gradients in `params()` order and returns the scaled loss.
    pub fn loss_and_grad(
        &self,
        columns: &[f64],
        effective_length: usize,
        target: f64,
        rng: Option<&mut Rng>,
        grads: &mut [Vec<f64>],
        scale: f64,
    ) -> Result<(f64, SequenceTrace)> {
        let trace = self.forward(columns, effective_length, rng)?;
        let (loss, dz) = output_loss(
            Activation::Sigmoid,
            LossKind::BinaryCrossEntropy,
            &trace.logit,
            &[trace.probability],
            &[target],
        );
        let (lstm_grads, head_grads) = grads.split_at_mut(3);
        let (gw, gb) = head_grads.split_at_mut(1);
        let mut dh = self.head.backward(&trace.head_input, &dz, &mut gw[0], &mut gb[0], scale);
        if !trace.mask.is_empty() {
            dh.iter_mut().zip(&trace.mask).for_each(|(g, m)| *g *= m);
        }
        self.lstm.backward(columns, &trace.lstm, &dh, lstm_grads, scale);
        Ok((loss * scale, trace))
    }
}

impl Parameterized for SequenceClassifier {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.lstm.params();
        p.push(&self.head.weights);
        p.push(&self.head.bias);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.lstm.params_mut();
        p.push(&mut self.head.weights);
        p.push(&mut self.head.bias);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::rng_from_seed;

    #[test]
    fn zero_model_predicts_one_half() {
        let m = SequenceClassifier::zeros(3, 4);
        let t = m.forward(&[1.0, 2.0, 3.0], 1, None).unwrap();
        assert_eq!(t.probability, 0.5);
    }

    #[test]
    fn masked_timesteps_get_no_gradient_influence() {
        let mut rng = rng_from_seed(8);
        let m = SequenceClassifier::new(2, 3, 0.0, &mut rng).unwrap();
        let short = [0.4, -0.2, 0.1, 0.9];
        let long = [0.4, -0.2, 0.1, 0.9, 0.0, 0.0, 0.0, 0.0];
        let mut g1 = m.zero_grads();
        let mut g2 = m.zero_grads();
        m.loss_and_grad(&short, 2, 1.0, None, &mut g1, 1.0).unwrap();
        m.loss_and_grad(&long, 2, 1.0, None, &mut g2, 1.0).unwrap();
        assert_eq!(g1, g2);
    }
}
