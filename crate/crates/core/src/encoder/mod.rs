//! Visit-window encoding: embeddings, self-attention layers, co-location
//! neighbours and social fusion into the context vector.

mod colocation;
mod config;
mod model;
mod vocab;
mod window;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Mat;

pub use colocation::{build_colocation, CoLocationMatrix, Neighbor};
pub use config::EncoderConfig;
pub use model::{sinusoidal_positions, SequenceEncoder};
pub(crate) use model::linear;
pub use vocab::{Vocabularies, HOURS_PER_WEEK};
pub use window::{build_window, VisitWindow};

/// Fixed-width representation of a visit sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    pub values: Vec<f64>,
}

impl ContextVector {
    pub fn new(values: Vec<f64>) -> Self {
        ContextVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_row(&self) -> Mat {
        Array2::from_shape_vec((1, self.values.len()), self.values.clone()).expect("1 × n")
    }

    pub(crate) fn from_row(m: &Mat) -> Result<Self> {
        let values: Vec<f64> = m.iter().copied().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite context vector".into()));
        }
        Ok(ContextVector { values })
    }
}

#[cfg(test)]
mod tests;
