use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelError};
use crate::numerics::{Graph, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct AttnIdx {
    pub wq: usize,
    pub bq: usize,
    pub wk: usize,
    pub bk: usize,
    pub wv: usize,
    pub bv: usize,
    pub wo: usize,
    pub bo: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct NormIdx {
    pub gain: usize,
    pub bias: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct FfIdx {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct EncLayerIdx {
    pub attn: AttnIdx,
    pub norm1: NormIdx,
    pub ff: FfIdx,
    pub norm2: NormIdx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct DecLayerIdx {
    pub self_attn: AttnIdx,
    pub norm1: NormIdx,
    pub cross_attn: AttnIdx,
    pub norm2: NormIdx,
    pub ff: FfIdx,
    pub norm3: NormIdx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    /// Uniform in ±√(6 / (fan_in + fan_out)).
    Scaled,
    Zeros,
    Ones,
}

/// Position of every tensor in the flat parameter list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pub embedding: usize,
    pub enc: Vec<EncLayerIdx>,
    pub dec: Vec<DecLayerIdx>,
    pub out_weight: Option<usize>,
    pub out_bias: usize,
}

struct Spec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

struct Builder {
    specs: Vec<Spec>,
}

impl Builder {
    fn add(&mut self, name: String, shape: &[usize], init: Init) -> usize {
        self.specs.push(Spec {
            name,
            shape: shape.to_vec(),
            init,
        });
        self.specs.len() - 1
    }

    fn linear(&mut self, prefix: &str, w: &str, b: &str, fan_in: usize, fan_out: usize) -> (usize, usize) {
        let wi = self.add(format!("{prefix}.{w}"), &[fan_in, fan_out], Init::Scaled);
        let bi = self.add(format!("{prefix}.{b}"), &[fan_out], Init::Zeros);
        (wi, bi)
    }

    fn attention(&mut self, prefix: &str, d: usize) -> AttnIdx {
        let (wq, bq) = self.linear(prefix, "wq", "bq", d, d);
        let (wk, bk) = self.linear(prefix, "wk", "bk", d, d);
        let (wv, bv) = self.linear(prefix, "wv", "bv", d, d);
        let (wo, bo) = self.linear(prefix, "wo", "bo", d, d);
        AttnIdx {
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
        }
    }

    fn norm(&mut self, prefix: &str, d: usize) -> NormIdx {
        NormIdx {
            gain: self.add(format!("{prefix}.gain"), &[d], Init::Ones),
            bias: self.add(format!("{prefix}.bias"), &[d], Init::Zeros),
        }
    }

    fn ff(&mut self, prefix: &str, d: usize, f: usize) -> FfIdx {
        let (w1, b1) = self.linear(prefix, "w1", "b1", d, f);
        let (w2, b2) = self.linear(prefix, "w2", "b2", f, d);
        FfIdx { w1, b1, w2, b2 }
    }
}

impl Layout {
    fn build(config: &ModelConfig) -> (Layout, Vec<Spec>) {
        let (d, f, v) = (config.d_model, config.d_ff, config.vocab_size);
        let mut b = Builder { specs: Vec::new() };
        let embedding = b.add("embedding".into(), &[v, d], Init::Scaled);
        let enc = (0..config.n_enc_layers)
            .map(|l| EncLayerIdx {
                attn: b.attention(&format!("enc.{l}.self_attn"), d),
                norm1: b.norm(&format!("enc.{l}.norm1"), d),
                ff: b.ff(&format!("enc.{l}.ff"), d, f),
                norm2: b.norm(&format!("enc.{l}.norm2"), d),
            })
            .collect();
        let dec = (0..config.n_dec_layers)
            .map(|l| DecLayerIdx {
                self_attn: b.attention(&format!("dec.{l}.self_attn"), d),
                norm1: b.norm(&format!("dec.{l}.norm1"), d),
                cross_attn: b.attention(&format!("dec.{l}.cross_attn"), d),
                norm2: b.norm(&format!("dec.{l}.norm2"), d),
                ff: b.ff(&format!("dec.{l}.ff"), d, f),
                norm3: b.norm(&format!("dec.{l}.norm3"), d),
            })
            .collect();
        let out_weight = (!config.tie_embeddings).then(|| b.add("output.weight".into(), &[d, v], Init::Scaled));
        let out_bias = b.add("output.bias".into(), &[v], Init::Zeros);
        (
            Layout {
                embedding,
                enc,
                dec,
                out_weight,
                out_bias,
            },
            b.specs,
        )
    }
}

/// All trainable tensors of the encoder-decoder, in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    pub(crate) layout: Layout,
}

impl ModelParams {
    /// Seeded initialisation. Matrices are scaled-uniform, biases zero,
    /// layer-norm gains one.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let (layout, specs) = Layout::build(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for spec in specs {
            let t = match spec.init {
                Init::Zeros => Tensor::zeros(&spec.shape),
                Init::Ones => Tensor::ones(&spec.shape),
                Init::Scaled => {
                    let limit = (6.0 / (spec.shape[0] + spec.shape[1]) as f64).sqrt();
                    let n = spec.shape[0] * spec.shape[1];
                    let data = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
                    Tensor::new(&spec.shape, data)?
                }
            };
            names.push(spec.name);
            tensors.push(t);
        }
        Ok(Self {
            config: config.clone(),
            names,
            tensors,
            layout,
        })
    }

    /// Rebuilds from named tensors, checking names and shapes against the
    /// layout implied by `config`.
    pub fn from_named(config: &ModelConfig, named: Vec<(String, Tensor)>) -> Result<Self, ModelError> {
        config.validate()?;
        let (layout, specs) = Layout::build(config);
        if named.len() != specs.len() {
            return Err(ModelError::Layout(format!("expected {} tensors, got {}", specs.len(), named.len())));
        }
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for (spec, (name, t)) in specs.into_iter().zip(named) {
            if spec.name != name || spec.shape != t.shape() {
                return Err(ModelError::Layout(format!(
                    "expected `{}` {:?}, got `{name}` {:?}",
                    spec.name,
                    spec.shape,
                    t.shape()
                )));
            }
            names.push(name);
            tensors.push(t);
        }
        Ok(Self {
            config: config.clone(),
            names,
            tensors,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Names alongside mutable tensors, for optimizers.
    pub fn split_mut(&mut self) -> (&[String], &mut [Tensor]) {
        (&self.names, &mut self.tensors)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    /// Total scalar count of the allocated tensors.
    pub fn allocated_len(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Records every tensor on `g`; as trainable inputs when `trainable`.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| if trainable { g.param(t.clone()) } else { g.constant(t.clone()) })
            .collect()
    }
}
