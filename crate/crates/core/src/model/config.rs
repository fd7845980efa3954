use serde::{Deserialize, Serialize};

use super::ModelError;

/// Encoder-decoder hyperparameters. Parameter shapes depend only on this.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub max_len: usize,
    pub dropout_rate: f64,
    /// Reuse the embedding matrix (transposed) as the output projection.
    pub tie_embeddings: bool,
    /// Add sinusoidal position encodings to embeddings. Off only in tests.
    pub positional_encoding: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_heads: 4,
            n_enc_layers: 8,
            n_dec_layers: 8,
            d_ff: 256,
            vocab_size: 0,
            max_len: 256,
            dropout_rate: 0.1,
            tie_embeddings: false,
            positional_encoding: true,
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::Config(m));
        if self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 {
            return fail("d_model, n_heads and d_ff must be positive".into());
        }
        if self.d_model % self.n_heads != 0 {
            return fail(format!("d_model {} is not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.vocab_size == 0 {
            return fail("vocab_size must be positive".into());
        }
        if self.max_len == 0 {
            return fail("max_len must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate must lie in [0, 1), got {}", self.dropout_rate));
        }
        Ok(())
    }

    /// Closed-form number of scalar parameters.
    ///
    /// Every linear map carries a bias. Per encoder layer: self-attention
    /// `4(d² + d)`, feed-forward `2·d·f + f + d`, two layer norms `2·2d`.
    /// Per decoder layer: self- and cross-attention, feed-forward and three
    /// layer norms. Plus the `V × d` embedding, the `d × V` output matrix
    /// (absent when tied) and the `V` output bias.
    pub fn count_params(&self) -> usize {
        let (d, f, v) = (self.d_model, self.d_ff, self.vocab_size);
        let attention = 4 * (d * d + d);
        let norm = 2 * d;
        let ff = 2 * d * f + f + d;
        let enc_layer = attention + ff + 2 * norm;
        let dec_layer = 2 * attention + ff + 3 * norm;
        let output = if self.tie_embeddings { 0 } else { d * v };
        v * d + self.n_enc_layers * enc_layer + self.n_dec_layers * dec_layer + output + v
    }
}
