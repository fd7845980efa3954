use std::sync::Arc;

use rand::RngCore;

use super::params::{AttnIdx, DecLayerIdx, EncLayerIdx, FfIdx, NormIdx};
use super::{ModelError, ModelParams};
use crate::numerics::{Graph, Tensor, Var};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-pass options: dropout (training only) and optional logs of every
/// attention probability matrix and feed-forward pre-activation, kept for
/// instrumentation.
#[derive(Default)]
pub struct ForwardCtx<'r> {
    dropout: Option<(f64, &'r mut dyn RngCore)>,
    attention: Option<Vec<Var>>,
    relu_inputs: Option<Vec<Var>>,
}

impl<'r> ForwardCtx<'r> {
    pub fn eval() -> Self {
        Self::default()
    }

    pub fn train(rate: f64, rng: &'r mut dyn RngCore) -> Self {
        Self {
            dropout: (rate > 0.0).then_some((rate, rng)),
            ..Self::default()
        }
    }

    /// Collects attention probabilities of every head in every layer and
    /// the input of every ReLU.
    pub fn recording() -> Self {
        Self {
            dropout: None,
            attention: Some(Vec::new()),
            relu_inputs: Some(Vec::new()),
        }
    }

    pub fn attention_log(&self) -> &[Var] {
        self.attention.as_deref().unwrap_or(&[])
    }

    /// Feed-forward pre-activations, encoder layers first.
    pub fn relu_log(&self) -> &[Var] {
        self.relu_inputs.as_deref().unwrap_or(&[])
    }

    fn drop(&mut self, g: &mut Graph, x: Var) -> Result<Var, ModelError> {
        match &mut self.dropout {
            Some((rate, rng)) => Ok(g.dropout(x, *rate, &mut **rng)?),
            None => Ok(x),
        }
    }
}

/// Sinusoidal encodings for positions `offset..offset + k`.
pub fn positional_encoding(k: usize, d: usize, offset: usize) -> Tensor {
    let mut data = vec![0.0; k * d];
    for (r, row) in data.chunks_mut(d).enumerate() {
        let pos = (offset + r) as f64;
        for i in (0..d).step_by(2) {
            let angle = pos / 10000f64.powf(i as f64 / d as f64);
            row[i] = angle.sin();
            if i + 1 < d {
                row[i + 1] = angle.cos();
            }
        }
    }
    Tensor::from_parts(vec![k, d], data)
}

fn check_len(params: &ModelParams, len: usize, what: &'static str) -> Result<(), ModelError> {
    let max = params.config().max_len;
    if len == 0 || len > max {
        return Err(ModelError::Length { what, len, max });
    }
    Ok(())
}

fn embed(g: &mut Graph, params: &ModelParams, vars: &[Var], ids: &[usize], offset: usize) -> Result<Var, ModelError> {
    let cfg = params.config();
    let x = g.embedding(vars[params.layout.embedding], ids)?;
    let x = g.scale(x, (cfg.d_model as f64).sqrt())?;
    if !cfg.positional_encoding {
        return Ok(x);
    }
    Ok(g.add_const(x, &positional_encoding(ids.len(), cfg.d_model, offset))?)
}

fn linear(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var, ModelError> {
    let y = g.matmul(x, w)?;
    Ok(g.add_row(y, b)?)
}

fn norm(g: &mut Graph, vars: &[Var], idx: NormIdx, x: Var) -> Result<Var, ModelError> {
    Ok(g.layer_norm(x, vars[idx.gain], vars[idx.bias], LAYER_NORM_EPS)?)
}

fn feed_forward(g: &mut Graph, vars: &[Var], idx: FfIdx, x: Var, ctx: &mut ForwardCtx) -> Result<Var, ModelError> {
    let h = linear(g, x, vars[idx.w1], vars[idx.b1])?;
    if let Some(log) = &mut ctx.relu_inputs {
        log.push(h);
    }
    let h = g.relu(h)?;
    linear(g, h, vars[idx.w2], vars[idx.b2])
}

/// Scaled dot-product attention over already projected `q`, `k`, `v`,
/// followed by the output projection.
#[allow(clippy::too_many_arguments)]
fn attend(
    g: &mut Graph,
    vars: &[Var],
    idx: &AttnIdx,
    n_heads: usize,
    q: Var,
    k: Var,
    v: Var,
    mask: Option<Arc<Vec<bool>>>,
    ctx: &mut ForwardCtx,
) -> Result<Var, ModelError> {
    let d = g.value(q).cols();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let (qh, kh, vh) = if n_heads == 1 {
            (q, k, v)
        } else {
            (
                g.slice_cols(q, h * dh, dh)?,
                g.slice_cols(k, h * dh, dh)?,
                g.slice_cols(v, h * dh, dh)?,
            )
        };
        let s = g.matmul_bt(qh, kh)?;
        let s = g.scale(s, scale)?;
        let p = g.softmax_rows(s, mask.clone())?;
        if let Some(log) = &mut ctx.attention {
            log.push(p);
        }
        heads.push(g.matmul(p, vh)?);
    }
    let joined = if n_heads == 1 { heads[0] } else { g.concat_cols(&heads)? };
    linear(g, joined, vars[idx.wo], vars[idx.bo])
}

fn project_kv(g: &mut Graph, vars: &[Var], idx: &AttnIdx, x: Var) -> Result<(Var, Var), ModelError> {
    Ok((linear(g, x, vars[idx.wk], vars[idx.bk])?, linear(g, x, vars[idx.wv], vars[idx.bv])?))
}

/// `rows × keys` mask allowing every real key; `None` when nothing is padded.
fn key_mask(rows: usize, key_real: &[bool]) -> Option<Arc<Vec<bool>>> {
    if key_real.iter().all(|&r| r) {
        return None;
    }
    let mut m = Vec::with_capacity(rows * key_real.len());
    for _ in 0..rows {
        m.extend_from_slice(key_real);
    }
    Some(Arc::new(m))
}

fn causal_mask(real: &[bool]) -> Arc<Vec<bool>> {
    let k = real.len();
    let mut m = vec![false; k * k];
    for i in 0..k {
        for j in 0..=i {
            m[i * k + j] = real[j];
        }
    }
    Arc::new(m)
}

fn encoder_layer(
    g: &mut Graph,
    params: &ModelParams,
    vars: &[Var],
    layer: &EncLayerIdx,
    x: Var,
    mask: Option<Arc<Vec<bool>>>,
    ctx: &mut ForwardCtx,
) -> Result<Var, ModelError> {
    let heads = params.config().n_heads;
    let q = linear(g, x, vars[layer.attn.wq], vars[layer.attn.bq])?;
    let (k, v) = project_kv(g, vars, &layer.attn, x)?;
    let a = attend(g, vars, &layer.attn, heads, q, k, v, mask, ctx)?;
    let a = ctx.drop(g, a)?;
    let x = g.add(x, a)?;
    let x = norm(g, vars, layer.norm1, x)?;
    let f = feed_forward(g, vars, layer.ff, x, ctx)?;
    let f = ctx.drop(g, f)?;
    let x = g.add(x, f)?;
    norm(g, vars, layer.norm2, x)
}

/// Self-attention keys/values seen by a decoder layer: either projected from
/// the full teacher-forced input, or a cache that grows one row per step.
enum SelfKv<'c> {
    Full(Arc<Vec<bool>>),
    Cached(&'c mut Option<(Var, Var)>),
}

#[allow(clippy::too_many_arguments)]
fn decoder_layer(
    g: &mut Graph,
    params: &ModelParams,
    vars: &[Var],
    layer: &DecLayerIdx,
    x: Var,
    self_kv: SelfKv,
    cross_kv: (Var, Var),
    cross_mask: Option<Arc<Vec<bool>>>,
    ctx: &mut ForwardCtx,
) -> Result<Var, ModelError> {
    let heads = params.config().n_heads;
    let sa = &layer.self_attn;
    let q = linear(g, x, vars[sa.wq], vars[sa.bq])?;
    let (k_new, v_new) = project_kv(g, vars, sa, x)?;
    let (k, v, mask) = match self_kv {
        SelfKv::Full(mask) => (k_new, v_new, Some(mask)),
        SelfKv::Cached(slot) => {
            let (k, v) = match slot.take() {
                Some((kc, vc)) => (g.concat_rows(kc, k_new)?, g.concat_rows(vc, v_new)?),
                None => (k_new, v_new),
            };
            *slot = Some((k, v));
            (k, v, None)
        }
    };
    let a = attend(g, vars, sa, heads, q, k, v, mask, ctx)?;
    let a = ctx.drop(g, a)?;
    let x = g.add(x, a)?;
    let x = norm(g, vars, layer.norm1, x)?;

    let ca = &layer.cross_attn;
    let q = linear(g, x, vars[ca.wq], vars[ca.bq])?;
    let c = attend(g, vars, ca, heads, q, cross_kv.0, cross_kv.1, cross_mask, ctx)?;
    let c = ctx.drop(g, c)?;
    let x = g.add(x, c)?;
    let x = norm(g, vars, layer.norm2, x)?;

    let f = feed_forward(g, vars, layer.ff, x, ctx)?;
    let f = ctx.drop(g, f)?;
    let x = g.add(x, f)?;
    norm(g, vars, layer.norm3, x)
}

fn output_projection(g: &mut Graph, params: &ModelParams, vars: &[Var], x: Var) -> Result<Var, ModelError> {
    let l = &params.layout;
    let y = match l.out_weight {
        Some(w) => g.matmul(x, vars[w])?,
        None => g.matmul_bt(x, vars[l.embedding])?,
    };
    Ok(g.add_row(y, vars[l.out_bias])?)
}

/// Encoder stack. `src_real[i]` is false at pad positions, which are masked
/// out as attention keys. Returns the `k × d_model` context.
pub fn encode(
    g: &mut Graph,
    params: &ModelParams,
    vars: &[Var],
    src_ids: &[usize],
    src_real: &[bool],
    ctx: &mut ForwardCtx,
) -> Result<Var, ModelError> {
    check_len(params, src_ids.len(), "source")?;
    if src_real.len() != src_ids.len() {
        return Err(ModelError::Mask {
            ids: src_ids.len(),
            mask: src_real.len(),
        });
    }
    let mut x = embed(g, params, vars, src_ids, 0)?;
    x = ctx.drop(g, x)?;
    let mask = key_mask(src_ids.len(), src_real);
    for layer in &params.layout.enc {
        x = encoder_layer(g, params, vars, layer, x, mask.clone(), ctx)?;
    }
    Ok(x)
}

/// Teacher-forced decoder stack plus output projection: `k × vocab_size`
/// logits for the BOS-prefixed input `tgt_in`.
#[allow(clippy::too_many_arguments)]
pub fn decode_forward(
    g: &mut Graph,
    params: &ModelParams,
    vars: &[Var],
    tgt_in: &[usize],
    tgt_real: &[bool],
    context: Var,
    src_real: &[bool],
    ctx: &mut ForwardCtx,
) -> Result<Var, ModelError> {
    check_len(params, tgt_in.len(), "target")?;
    if tgt_real.len() != tgt_in.len() {
        return Err(ModelError::Mask {
            ids: tgt_in.len(),
            mask: tgt_real.len(),
        });
    }
    let ctx_rows = g.value(context).rows();
    if src_real.len() != ctx_rows {
        return Err(ModelError::Mask {
            ids: ctx_rows,
            mask: src_real.len(),
        });
    }
    let mut x = embed(g, params, vars, tgt_in, 0)?;
    x = ctx.drop(g, x)?;
    let self_mask = causal_mask(tgt_real);
    let cross_mask = key_mask(tgt_in.len(), src_real);
    for layer in &params.layout.dec {
        let cross_kv = project_kv(g, vars, &layer.cross_attn, context)?;
        x = decoder_layer(
            g,
            params,
            vars,
            layer,
            x,
            SelfKv::Full(self_mask.clone()),
            cross_kv,
            cross_mask.clone(),
            ctx,
        )?;
    }
    output_projection(g, params, vars, x)
}

/// Untraced encoder pass over an unpadded sequence.
pub fn context(params: &ModelParams, src_ids: &[usize]) -> Result<Tensor, ModelError> {
    let mut g = Graph::inference();
    let vars = params.bind(&mut g, false);
    let c = encode(&mut g, params, &vars, src_ids, &vec![true; src_ids.len()], &mut ForwardCtx::eval())?;
    Ok(g.value(c).clone())
}

/// Untraced teacher-forced logits for an unpadded pair.
pub fn logits(params: &ModelParams, src_ids: &[usize], tgt_in: &[usize]) -> Result<Tensor, ModelError> {
    let mut g = Graph::inference();
    let vars = params.bind(&mut g, false);
    let src_real = vec![true; src_ids.len()];
    let ctx = &mut ForwardCtx::eval();
    let c = encode(&mut g, params, &vars, src_ids, &src_real, ctx)?;
    let y = decode_forward(&mut g, params, &vars, tgt_in, &vec![true; tgt_in.len()], c, &src_real, ctx)?;
    Ok(g.value(y).clone())
}

/// Step-at-a-time decoder that caches self-attention keys/values, so each
/// step costs one row per layer instead of re-running the prefix.
pub struct IncrementalDecoder<'p> {
    params: &'p ModelParams,
    g: Graph,
    vars: Vec<Var>,
    cross: Vec<(Var, Var)>,
    caches: Vec<Option<(Var, Var)>>,
    pos: usize,
}

impl<'p> IncrementalDecoder<'p> {
    /// Encodes `src_ids` (no padding) and readies position 0.
    pub fn new(params: &'p ModelParams, src_ids: &[usize]) -> Result<Self, ModelError> {
        let mut g = Graph::inference();
        let vars = params.bind(&mut g, false);
        let ctx = &mut ForwardCtx::eval();
        let c = encode(&mut g, params, &vars, src_ids, &vec![true; src_ids.len()], ctx)?;
        let mut cross = Vec::with_capacity(params.layout.dec.len());
        for layer in &params.layout.dec {
            cross.push(project_kv(&mut g, &vars, &layer.cross_attn, c)?);
        }
        Ok(Self {
            params,
            g,
            vars,
            cross,
            caches: vec![None; params.layout.dec.len()],
            pos: 0,
        })
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    /// Feeds the decoder input at the current position and returns the
    /// logits row predicting the output there.
    pub fn step(&mut self, token: usize) -> Result<Vec<f64>, ModelError> {
        let max = self.params.config().max_len;
        if self.pos >= max {
            return Err(ModelError::Length {
                what: "target",
                len: self.pos + 1,
                max,
            });
        }
        let (g, params, vars) = (&mut self.g, self.params, &self.vars);
        let ctx = &mut ForwardCtx::eval();
        let mut x = embed(g, params, vars, &[token], self.pos)?;
        for (l, layer) in params.layout.dec.iter().enumerate() {
            x = decoder_layer(
                g,
                params,
                vars,
                layer,
                x,
                SelfKv::Cached(&mut self.caches[l]),
                self.cross[l],
                None,
                ctx,
            )?;
        }
        let y = output_projection(g, params, vars, x)?;
        self.pos += 1;
        Ok(g.value(y).data().to_vec())
    }
}
