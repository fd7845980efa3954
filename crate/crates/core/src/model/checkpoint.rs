//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                                              |
//! |--------------|------------------------------------------------------|
//! | 8            | magic `RDCKPT\0\x01`                                 |
//! | 8            | header length `n` (u64)                              |
//! | n            | JSON header: config, vocab hash, tensor names/shapes, optimizer settings, trainer state |
//! | 8 × Σ sizes  | parameter data (f64), in header order                |
//! | 8 × Σ sizes  | ADAM first then second moments, present when the header lists an optimizer |
//! | 32           | SHA-256 of every preceding byte                      |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelConfig, ModelError, ModelParams};
use crate::numerics::{AdamConfig, AdamState, Tensor};

const MAGIC: &[u8; 8] = b"RDCKPT\x00\x01";
const DIGEST_LEN: usize = 32;

/// Parameters plus everything needed to verify and resume from them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Content hash of the vocabulary the model was trained with.
    pub vocab_hash: String,
    pub optimizer: Option<AdamState>,
    /// Opaque resume state owned by the trainer.
    pub trainer_state: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct OptimizerEntry {
    config: AdamConfig,
    step_count: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: u32,
    config: ModelConfig,
    vocab_hash: String,
    tensors: Vec<TensorEntry>,
    optimizer: Option<OptimizerEntry>,
    trainer_state: Option<serde_json::Value>,
}

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::Corrupt(msg.into())
}

impl Checkpoint {
    pub fn new(params: ModelParams, vocab_hash: impl Into<String>) -> Self {
        Self {
            params,
            vocab_hash: vocab_hash.into(),
            optimizer: None,
            trainer_state: None,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let p = &self.params;
        let header = Header {
            format: 1,
            config: p.config().clone(),
            vocab_hash: self.vocab_hash.clone(),
            tensors: p
                .names()
                .iter()
                .zip(p.tensors())
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerEntry {
                config: o.config,
                step_count: o.step_count,
            }),
            trainer_state: self.trainer_state.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| corrupt(e.to_string()))?;
        let n_values = p.allocated_len() * if self.optimizer.is_some() { 3 } else { 1 };
        let mut out = Vec::with_capacity(16 + json.len() + 8 * n_values + DIGEST_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |ts: &[Tensor]| {
            for t in ts {
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        };
        put(p.tensors());
        if let Some(o) = &self.optimizer {
            if o.first_moment.len() != p.tensors().len() || o.second_moment.len() != p.tensors().len() {
                return Err(ModelError::Layout("optimizer state does not match parameters".into()));
            }
            put(&o.first_moment);
            put(&o.second_moment);
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < MAGIC.len() + 8 + DIGEST_LEN {
            return Err(corrupt(format!("file is truncated ({} bytes)", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(corrupt("not a checkpoint (bad magic)"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch; file is truncated or damaged"));
        }
        let header_len = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
        let rest = &body[16..];
        if header_len > rest.len() {
            return Err(corrupt("header length exceeds file size"));
        }
        let header: Header =
            serde_json::from_slice(&rest[..header_len]).map_err(|e| corrupt(format!("bad header: {e}")))?;
        if header.format != 1 {
            return Err(corrupt(format!("unsupported format version {}", header.format)));
        }
        let mut data = &rest[header_len..];
        let mut take = |shape: &[usize]| -> Result<Tensor, ModelError> {
            let n: usize = shape.iter().product();
            if data.len() < 8 * n {
                return Err(corrupt("tensor data is truncated"));
            }
            let (chunk, tail) = data.split_at(8 * n);
            data = tail;
            let values = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            Tensor::new(shape, values).map_err(|e| corrupt(e.to_string()))
        };
        let mut named = Vec::with_capacity(header.tensors.len());
        for e in &header.tensors {
            named.push((e.name.clone(), take(&e.shape)?));
        }
        let optimizer = match &header.optimizer {
            None => None,
            Some(o) => {
                let first = header.tensors.iter().map(|e| take(&e.shape)).collect::<Result<Vec<_>, _>>()?;
                let second = header.tensors.iter().map(|e| take(&e.shape)).collect::<Result<Vec<_>, _>>()?;
                Some(AdamState {
                    config: o.config,
                    step_count: o.step_count,
                    first_moment: first,
                    second_moment: second,
                })
            }
        };
        if !data.is_empty() {
            return Err(corrupt(format!("{} unexpected trailing bytes", data.len())));
        }
        let params = ModelParams::from_named(&header.config, named)?;
        Ok(Self {
            params,
            vocab_hash: header.vocab_hash,
            optimizer,
            trainer_state: header.trainer_state,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = fs::read(path).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            ModelError::Corrupt(m) => ModelError::Corrupt(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Fails unless the checkpoint was trained with the vocabulary hashing
    /// to `vocab_hash`.
    pub fn check_vocab(&self, vocab_hash: &str) -> Result<(), ModelError> {
        if self.vocab_hash != vocab_hash {
            return Err(ModelError::VocabMismatch {
                expected: self.vocab_hash.clone(),
                found: vocab_hash.to_string(),
            });
        }
        Ok(())
    }
}
