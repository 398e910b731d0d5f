use rand::seq::SliceRandom;

use super::{rng_from_seed, Optimizer, Parameterized, Rng, TrainConfig};
use crate::error::Result;

/// A model trainable by minibatch gradient descent on samples of one type.
pub trait Trainable: Parameterized {
    type Sample;

    /// Forward and backward pass for one sample in training mode, adding
    /// `scale ·` gradients to `grads`. Returns the unscaled loss and whether
    /// the training-mode prediction was correct.
    fn accumulate(
        &self,
        sample: &Self::Sample,
        rng: &mut Rng,
        grads: &mut [Vec<f64>],
        scale: f64,
    ) -> Result<(f64, bool)>;

    /// Learning-rate multiplier per parameter group.
    fn lr_scales(&self) -> Vec<f64> {
        vec![1.0; self.params().len()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Minibatch training loop. Each epoch visits the samples in a fresh
/// shuffled order; batch gradients are means over the batch. The shuffle
/// and dropout stream is derived from `config.seed`, so a fixed seed gives
/// bitwise-reproducible parameters.
pub fn fit<M: Trainable>(
    model: &mut M,
    samples: &[M::Sample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&M, &EpochStats) -> Result<Control>,
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    rng.set_stream(1);
    let mut optimizer =
        Optimizer::new(config.optimizer, config.learning_rate).with_group_scales(model.lr_scales());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut grads = model.zero_grads();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| g.iter_mut().for_each(|x| *x = 0.0));
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (loss, ok) = model.accumulate(&samples[i], &mut rng, &mut grads, scale)?;
                total_loss += loss;
                correct += ok as usize;
            }
            optimizer.step(model.params_mut(), &grads)?;
        }
        let n = samples.len().max(1) as f64;
        let stats = EpochStats {
            epoch,
            loss: total_loss / n,
            accuracy: correct as f64 / n,
        };
        let control = on_epoch(model, &stats)?;
        history.push(stats);
        if control == Control::Stop {
            break;
        }
    }
    Ok(history)
}
