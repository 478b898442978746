use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the visit-sequence encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub window_length: usize,
    pub hidden_dim: usize,
    pub poi_embed_dim: usize,
    pub category_embed_dim: usize,
    pub temporal_embed_dim: usize,
    pub num_attention_heads: usize,
    pub num_layers: usize,
    pub neighbor_count: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            window_length: 20,
            hidden_dim: 128,
            poi_embed_dim: 80,
            category_embed_dim: 24,
            temporal_embed_dim: 24,
            num_attention_heads: 4,
            num_layers: 2,
            neighbor_count: 8,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 {
            return Err(Error::config("window_length must be positive"));
        }
        if self.poi_embed_dim + self.category_embed_dim + self.temporal_embed_dim != self.hidden_dim
        {
            return Err(Error::config(format!(
                "embedding dims {}+{}+{} do not add up to hidden_dim {}",
                self.poi_embed_dim, self.category_embed_dim, self.temporal_embed_dim, self.hidden_dim
            )));
        }
        if self.num_attention_heads == 0 || !self.hidden_dim.is_multiple_of(self.num_attention_heads) {
            return Err(Error::config(format!(
                "hidden_dim {} not divisible by {} heads",
                self.hidden_dim, self.num_attention_heads
            )));
        }
        if self.num_layers == 0 {
            return Err(Error::config("num_layers must be at least 1"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_attention_heads
    }

    pub fn feedforward_dim(&self) -> usize {
        2 * self.hidden_dim
    }
}
