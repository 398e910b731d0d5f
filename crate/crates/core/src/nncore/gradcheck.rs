use super::Parameterized;

/// `|a − n| / max(|a|, |n|, 1e-6)`. The floor keeps gradients that are
/// within finite-difference round-off of zero from dominating the result.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares `analytic` gradients (in `params()` layout) against central
/// differences `(f(θ+ε) − f(θ−ε)) / 2ε` of `loss`, one parameter at a time.
/// Returns the largest relative error. Parameters are restored afterwards.
pub fn gradient_check<M: Parameterized>(
    model: &mut M,
    analytic: &[Vec<f64>],
    epsilon: f64,
    mut loss: impl FnMut(&M) -> f64,
) -> f64 {
    let shapes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    assert_eq!(shapes.len(), analytic.len(), "gradient layout mismatch");
    let mut worst = 0.0f64;
    for (g, &len) in shapes.iter().enumerate() {
        assert_eq!(len, analytic[g].len(), "gradient group {g} size mismatch");
        for i in 0..len {
            let original = model.params()[g][i];
            model.params_mut()[g][i] = original + epsilon;
            let plus = loss(model);
            model.params_mut()[g][i] = original - epsilon;
            let minus = loss(model);
            model.params_mut()[g][i] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic[g][i], numeric));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::mlp::MlpLayer;
    use crate::nncore::{
        rng_from_seed, Activation, DenseLayer, DropoutLayer, LossKind, Mlp, SequenceClassifier,
    };

    #[test]
    fn dense_sigmoid_gradients_match() {
        let mut rng = rng_from_seed(21);
        let mut m = Mlp::new(vec![MlpLayer::Dense(DenseLayer::new(
            4,
            1,
            Activation::Sigmoid,
            &mut rng,
        ))])
        .unwrap();
        let x = [0.2, -0.7, 1.1, 0.05];
        let mut g = m.zero_grads();
        m.loss_and_grad(&x, &[1.0], LossKind::BinaryCrossEntropy, None, &mut g, 1.0)
            .unwrap();
        let err = gradient_check(&mut m, &g, 1e-6, |m| {
            let mut scratch = m.zero_grads();
            m.loss_and_grad(&x, &[1.0], LossKind::BinaryCrossEntropy, None, &mut scratch, 1.0)
                .unwrap()
                .0
        });
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn lstm_length_three_gradients_match() {
        let mut rng = rng_from_seed(5);
        let mut m = SequenceClassifier::new(3, 4, 0.0, &mut rng).unwrap();
        let cols: Vec<f64> = (0..9).map(|i| ((i * 7) % 5) as f64 / 5.0 - 0.4).collect();
        let mut g = m.zero_grads();
        m.loss_and_grad(&cols, 3, 0.0, None, &mut g, 1.0).unwrap();
        let err = gradient_check(&mut m, &g, 1e-6, |m| {
            let mut s = m.zero_grads();
            m.loss_and_grad(&cols, 3, 0.0, None, &mut s, 1.0).unwrap().0
        });
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn inference_dropout_is_transparent_to_the_check() {
        let build = |with_dropout: bool| {
            let mut rng = rng_from_seed(2);
            let a = DenseLayer::new(3, 4, Activation::Tanh, &mut rng);
            let b = DenseLayer::new(4, 2, Activation::Softmax, &mut rng);
            let mut layers = vec![MlpLayer::Dense(a)];
            if with_dropout {
                layers.push(MlpLayer::Dropout(DropoutLayer::new(0.5).unwrap()));
            }
            layers.push(MlpLayer::Dense(b));
            Mlp::new(layers).unwrap()
        };
        let x = [0.4, -0.3, 0.9];
        let t = [0.0, 1.0];
        let check = |mut m: Mlp| {
            let mut g = m.zero_grads();
            m.loss_and_grad(&x, &t, LossKind::CategoricalCrossEntropy, None, &mut g, 1.0)
                .unwrap();
            gradient_check(&mut m, &g, 1e-6, |m| {
                let mut s = m.zero_grads();
                m.loss_and_grad(&x, &t, LossKind::CategoricalCrossEntropy, None, &mut s, 1.0)
                    .unwrap()
                    .0
            })
        };
        assert_eq!(check(build(true)), check(build(false)));
    }
}
