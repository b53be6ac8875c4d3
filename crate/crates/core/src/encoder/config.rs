use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and regularisation of one encoder tower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub embed_dim: usize,
    pub ffn_dim: usize,
    pub max_seq_len: usize,
    pub dropout: f64,
    pub attention_dropout: f64,
    /// Share one parameter set between the context and candidate towers.
    pub tie_towers: bool,
    /// Place the last token of every sequence at position `max_seq_len - 1`
    /// (the pooled token stays at 0), so recency maps to fixed positions.
    pub right_align_positions: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig::desk()
    }
}

impl EncoderConfig {
    /// Small enough to train from scratch on a laptop CPU.
    pub fn desk() -> Self {
        EncoderConfig {
            num_layers: 2,
            num_heads: 4,
            embed_dim: 64,
            ffn_dim: 128,
            max_seq_len: 256,
            dropout: 0.0,
            attention_dropout: 0.0,
            tie_towers: false,
            right_align_positions: true,
        }
    }

    /// The 12-layer, 768-wide shape used for the published models.
    pub fn published() -> Self {
        EncoderConfig {
            num_layers: 12,
            num_heads: 12,
            embed_dim: 768,
            ffn_dim: 3072,
            max_seq_len: 512,
            dropout: 0.1,
            attention_dropout: 0.2,
            tie_towers: false,
            right_align_positions: false,
        }
    }

    /// Tiny shape used by the gradient checker.
    pub fn toy() -> Self {
        EncoderConfig {
            num_layers: 2,
            num_heads: 2,
            embed_dim: 16,
            ffn_dim: 32,
            max_seq_len: 8,
            dropout: 0.0,
            attention_dropout: 0.0,
            tie_towers: false,
            right_align_positions: true,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_layers == 0 || self.num_heads == 0 || self.embed_dim == 0 || self.ffn_dim == 0 {
            return bad("encoder dimensions must be >= 1".into());
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return bad(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            ));
        }
        if self.max_seq_len == 0 {
            return bad("max_seq_len must be >= 1".into());
        }
        for (name, p) in [("dropout", self.dropout), ("attention_dropout", self.attention_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1), got {p}"));
            }
        }
        Ok(())
    }
}
