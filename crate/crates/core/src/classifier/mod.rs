//! Category head, training objective and training loop.

mod checkpoint;
mod model;
mod social;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use model::{ForecastModel, Objective, TrainingExample};
pub use social::{Predictor, SocialContext};
pub use train::{
    train, train_with_objective, validation_metric, EpochMetrics, TrainConfig, TrainState, Trainer,
};

const PROB_FLOOR: f64 = 1e-12;

/// Predicted distribution over the category vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistribution {
    pub probabilities: Vec<f64>,
}

impl CategoryDistribution {
    /// Softmax of `logits`; fails on non-finite input.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if let Some(bad) = logits.iter().position(|z| !z.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite logit {} at index {bad} of {}",
                logits[bad],
                logits.len()
            )));
        }
        Ok(CategoryDistribution {
            probabilities: crate::nn::softmax(logits),
        })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn get(&self, category: usize) -> f64 {
        self.probabilities[category]
    }

    /// Highest-probability class, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = i;
            }
        }
        best
    }
}

/// Cross-entropy of one prediction, with the probability floored at 1e-12.
pub fn category_loss(predicted: &CategoryDistribution, true_category: usize) -> f64 {
    -predicted.probabilities[true_category].max(PROB_FLOOR).ln()
}

#[cfg(test)]
mod tests;
