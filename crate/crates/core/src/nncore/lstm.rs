use super::{glorot, sigmoid, Rng};
use crate::error::{Error, Result};

/// Single LSTM layer. Gate blocks are stacked in the order input, forget,
/// output, candidate: rows `[0,H)`, `[H,2H)`, `[2H,3H)`, `[3H,4H)` of
/// `w_input` (`4H × d`), `w_hidden` (`4H × H`) and `bias` (`4H`).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub input_dim: usize,
    pub hidden: usize,
    pub w_input: Vec<f64>,
    pub w_hidden: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Per-step activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub steps: usize,
    /// Activated gates per step, `4H` each (i, f, o, g).
    gates: Vec<f64>,
    /// Cell states c_1..c_T, `H` each.
    cells: Vec<f64>,
    /// Hidden states h_1..h_T, `H` each.
    hiddens: Vec<f64>,
}

impl LstmTrace {
    pub fn hidden(&self, t: usize) -> &[f64] {
        let h = self.hiddens.len() / self.steps;
        &self.hiddens[t * h..(t + 1) * h]
    }

    pub fn cell(&self, t: usize) -> &[f64] {
        let h = self.cells.len() / self.steps;
        &self.cells[t * h..(t + 1) * h]
    }

    pub fn final_hidden(&self) -> &[f64] {
        self.hidden(self.steps - 1)
    }
}

impl LstmLayer {
    /// Glorot-uniform gate matrices, forget bias 1, other biases 0.
    pub fn new(input_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut w_input = Vec::with_capacity(4 * hidden * input_dim);
        let mut w_hidden = Vec::with_capacity(4 * hidden * hidden);
        for _ in 0..4 {
            w_input.extend(glorot(rng, input_dim, hidden, hidden * input_dim));
        }
        for _ in 0..4 {
            w_hidden.extend(glorot(rng, hidden, hidden, hidden * hidden));
        }
        let mut bias = vec![0.0; 4 * hidden];
        bias[hidden..2 * hidden].iter_mut().for_each(|b| *b = 1.0);
        LstmLayer {
            input_dim,
            hidden,
            w_input,
            w_hidden,
            bias,
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmLayer {
            input_dim,
            hidden,
            w_input: vec![0.0; 4 * hidden * input_dim],
            w_hidden: vec![0.0; 4 * hidden * hidden],
            bias: vec![0.0; 4 * hidden],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d, h) = (self.input_dim, self.hidden);
        if self.w_input.len() != 4 * h * d || self.w_hidden.len() != 4 * h * h || self.bias.len() != 4 * h {
            return Err(Error::Shape(format!("lstm d={d} H={h}: inconsistent parameter sizes")));
        }
        Ok(())
    }

    /// Runs the recurrence over the first `effective_length` columns of
    /// `columns` (column-major, `input_dim` values per column). Later
    /// columns are padding and never touch the state.
    pub fn forward(&self, columns: &[f64], effective_length: usize) -> Result<LstmTrace> {
        let (d, hsz) = (self.input_dim, self.hidden);
        if effective_length == 0 {
            return Err(Error::Shape("lstm effective length must be ≥ 1".into()));
        }
        if !columns.len().is_multiple_of(d) || columns.len() / d < effective_length {
            return Err(Error::Shape(format!(
                "lstm expects ≥ {effective_length} columns of length {d}, got {} values",
                columns.len()
            )));
        }
        let mut gates = vec![0.0; effective_length * 4 * hsz];
        let mut cells = vec![0.0; effective_length * hsz];
        let mut hiddens = vec![0.0; effective_length * hsz];
        let zero = vec![0.0; hsz];
        let mut z = vec![0.0; 4 * hsz];
        for t in 0..effective_length {
            let x = &columns[t * d..(t + 1) * d];
            let (h_prev, c_prev) = if t == 0 {
                (&zero[..], &zero[..])
            } else {
                (
                    &hiddens[(t - 1) * hsz..t * hsz],
                    &cells[(t - 1) * hsz..t * hsz],
                )
            };
            for r in 0..4 * hsz {
                let wi = &self.w_input[r * d..(r + 1) * d];
                let wh = &self.w_hidden[r * hsz..(r + 1) * hsz];
                let mut acc = self.bias[r];
                for k in 0..d {
                    acc += wi[k] * x[k];
                }
                for k in 0..hsz {
                    acc += wh[k] * h_prev[k];
                }
                z[r] = acc;
            }
            let g = &mut gates[t * 4 * hsz..(t + 1) * 4 * hsz];
            for r in 0..3 * hsz {
                g[r] = sigmoid(z[r]);
            }
            for r in 3 * hsz..4 * hsz {
                g[r] = z[r].tanh();
            }
            let mut c_new = vec![0.0; hsz];
            for k in 0..hsz {
                c_new[k] = g[hsz + k] * c_prev[k] + g[k] * g[3 * hsz + k];
            }
            for k in 0..hsz {
                hiddens[t * hsz + k] = g[2 * hsz + k] * c_new[k].tanh();
            }
            cells[t * hsz..(t + 1) * hsz].copy_from_slice(&c_new);
        }
        Ok(LstmTrace {
            steps: effective_length,
            gates,
            cells,
            hiddens,
        })
    }

    /// Backpropagation through time from dL/dh at the final step.
    /// Accumulates `scale ·` gradients into `[w_input, w_hidden, bias]`.
    pub fn backward(
        &self,
        columns: &[f64],
        trace: &LstmTrace,
        d_final_hidden: &[f64],
        grads: &mut [Vec<f64>],
        scale: f64,
    ) {
        let (d, hsz) = (self.input_dim, self.hidden);
        let [g_wi, g_wh, g_b] = grads else {
            panic!("lstm backward expects three gradient groups");
        };
        let mut dh = d_final_hidden.to_vec();
        let mut dc = vec![0.0; hsz];
        let mut dz = vec![0.0; 4 * hsz];
        let zero = vec![0.0; hsz];
        for t in (0..trace.steps).rev() {
            let g = &trace.gates[t * 4 * hsz..(t + 1) * 4 * hsz];
            let c = trace.cell(t);
            let c_prev = if t == 0 { &zero[..] } else { trace.cell(t - 1) };
            let h_prev = if t == 0 { &zero[..] } else { trace.hidden(t - 1) };
            for k in 0..hsz {
                let (i, f, o, cand) = (g[k], g[hsz + k], g[2 * hsz + k], g[3 * hsz + k]);
                let tc = c[k].tanh();
                dc[k] += dh[k] * o * (1.0 - tc * tc);
                let d_o = dh[k] * tc;
                let d_i = dc[k] * cand;
                let d_f = dc[k] * c_prev[k];
                let d_g = dc[k] * i;
                dz[k] = d_i * i * (1.0 - i);
                dz[hsz + k] = d_f * f * (1.0 - f);
                dz[2 * hsz + k] = d_o * o * (1.0 - o);
                dz[3 * hsz + k] = d_g * (1.0 - cand * cand);
                dc[k] *= f;
            }
            let x = &columns[t * d..(t + 1) * d];
            dh.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..4 * hsz {
                let dzr = dz[r];
                if dzr == 0.0 {
                    continue;
                }
                let s = dzr * scale;
                let gwi = &mut g_wi[r * d..(r + 1) * d];
                for k in 0..d {
                    gwi[k] += s * x[k];
                }
                let gwh = &mut g_wh[r * hsz..(r + 1) * hsz];
                let wh = &self.w_hidden[r * hsz..(r + 1) * hsz];
                for k in 0..hsz {
                    gwh[k] += s * h_prev[k];
                    dh[k] += dzr * wh[k];
                }
                g_b[r] += s;
            }
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        vec![&self.w_input, &self.w_hidden, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::rng_from_seed;

    #[test]
    fn zero_parameters_stay_at_zero_state() {
        let layer = LstmLayer::zeros(3, 2);
        let cols = [0.5, -1.0, 2.0, 1.0, 1.0, 1.0];
        let tr = layer.forward(&cols, 2).unwrap();
        assert_eq!(tr.final_hidden(), &[0.0, 0.0]);
    }

    #[test]
    fn padding_columns_do_not_change_state() {
        let mut rng = rng_from_seed(5);
        let layer = LstmLayer::new(2, 3, &mut rng);
        let cols = [0.1, 0.2, -0.3, 0.4];
        let a = layer.forward(&cols, 2).unwrap();
        let padded = [0.1, 0.2, -0.3, 0.4, 0.0, 0.0, 0.0, 0.0];
        let b = layer.forward(&padded, 2).unwrap();
        assert_eq!(a.final_hidden(), b.final_hidden());
        assert!(layer.forward(&cols, 0).is_err());
        assert!(layer.forward(&cols, 3).is_err());
    }

    #[test]
    fn single_step_matches_hand_evaluation() {
        // H=1, d=1 with scalar gate weights; h_0 = c_0 = 0 so the recurrent part drops out.
        let layer = LstmLayer {
            input_dim: 1,
            hidden: 1,
            w_input: vec![0.5, -0.25, 1.5, 2.0],
            w_hidden: vec![0.3, 0.3, 0.3, 0.3],
            bias: vec![0.1, 1.0, -0.2, 0.0],
        };
        let x = 0.8;
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let i = s(0.5 * x + 0.1);
        let _f = s(-0.25 * x + 1.0);
        let o = s(1.5 * x - 0.2);
        let g = (2.0 * x).tanh();
        let c = i * g;
        let h = o * c.tanh();
        let tr = layer.forward(&[x], 1).unwrap();
        assert!((tr.cell(0)[0] - c).abs() < 1e-15);
        assert!((tr.final_hidden()[0] - h).abs() < 1e-15);
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let mut rng = rng_from_seed(2);
        let layer = LstmLayer::new(4, 3, &mut rng);
        assert_eq!(&layer.bias[3..6], &[1.0, 1.0, 1.0]);
        assert!(layer.bias[..3].iter().chain(&layer.bias[6..]).all(|&b| b == 0.0));
        layer.validate().unwrap();
    }
}
