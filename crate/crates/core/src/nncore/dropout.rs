use rand::Rng as _;

use super::Rng;
use crate::error::{Error, Result};

/// Inverted dropout: survivors are scaled by `1/(1−rate)` at training time,
/// inference is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutLayer {
    pub rate: f64,
}

impl DropoutLayer {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} not in [0, 1)")));
        }
        Ok(DropoutLayer { rate })
    }

    /// Draws a multiplicative mask of length `n`. Rate 0 draws nothing.
    pub fn mask(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        if self.rate == 0.0 {
            return vec![1.0; n];
        }
        let keep = 1.0 / (1.0 - self.rate);
        (0..n)
            .map(|_| if rng.gen::<f64>() < self.rate { 0.0 } else { keep })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rates() {
        assert!(DropoutLayer::new(1.0).is_err());
        assert!(DropoutLayer::new(-0.1).is_err());
        assert!(DropoutLayer::new(0.4).is_ok());
    }

    #[test]
    fn mask_preserves_expectation() {
        let d = DropoutLayer::new(0.4).unwrap();
        let mut rng = super::super::rng_from_seed(9);
        let m = d.mask(200_000, &mut rng);
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        let zeros = m.iter().filter(|&&x| x == 0.0).count() as f64 / m.len() as f64;
        assert!((zeros - 0.4).abs() < 0.01);
    }
}
