//! Self-attention encoder over visit windows and the social fusion step.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Mat, ParamId, ParamStore, Tape, Var};

use super::vocab::{Vocabularies, HOURS_PER_WEEK};
use super::{ContextVector, EncoderConfig, VisitWindow};

#[derive(Debug, Clone)]
pub(crate) struct AttentionParams {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
}

#[derive(Debug, Clone)]
struct LayerParams {
    attn: AttentionParams,
    ln1: (ParamId, ParamId),
    ff1: (ParamId, ParamId),
    ff2: (ParamId, ParamId),
    ln2: (ParamId, ParamId),
}

/// Parameter handles of the encoder; values live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct SequenceEncoder {
    config: EncoderConfig,
    poi_emb: ParamId,
    cat_emb: ParamId,
    time_emb: ParamId,
    layers: Vec<LayerParams>,
    fuse: AttentionParams,
    fuse_ln: (ParamId, ParamId),
    positional: Mat,
}

/// Xavier-uniform matrix.
pub(crate) fn xavier<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-a..a))
}

pub(crate) fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, a: f64) -> Mat {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-a..a))
}

pub(crate) fn linear<R: Rng>(
    store: &mut ParamStore,
    rng: &mut R,
    name: &str,
    fan_in: usize,
    fan_out: usize,
) -> (ParamId, ParamId) {
    let w = store.add(format!("{name}.w"), xavier(rng, fan_in, fan_out));
    let b = store.add(format!("{name}.b"), Mat::zeros((1, fan_out)));
    (w, b)
}

fn norm(store: &mut ParamStore, name: &str, dim: usize) -> (ParamId, ParamId) {
    let g = store.add(format!("{name}.gamma"), Mat::ones((1, dim)));
    let b = store.add(format!("{name}.beta"), Mat::zeros((1, dim)));
    (g, b)
}

fn attention<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, dim: usize) -> AttentionParams {
    let (wq, bq) = linear(store, rng, &format!("{name}.q"), dim, dim);
    let (wk, bk) = linear(store, rng, &format!("{name}.k"), dim, dim);
    let (wv, bv) = linear(store, rng, &format!("{name}.v"), dim, dim);
    let (wo, bo) = linear(store, rng, &format!("{name}.o"), dim, dim);
    AttentionParams {
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

/// Sinusoidal position table, `len × dim`.
pub fn sinusoidal_positions(len: usize, dim: usize) -> Mat {
    Array2::from_shape_fn((len, dim), |(pos, i)| {
        let pair = (i / 2) as f64;
        let angle = pos as f64 / 10_000f64.powf(2.0 * pair / dim as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// Multi-head scaled dot-product attention of `queries` over `keys`.
pub(crate) fn multi_head_attention(
    tape: &mut Tape,
    p: &AttentionParams,
    queries: Var,
    keys: Var,
    key_mask: &[bool],
    heads: usize,
) -> Var {
    let dim = tape.value(queries).ncols();
    let head_dim = dim / heads;
    let q = tape.affine(queries, p.wq, p.bq);
    let k = tape.affine(keys, p.wk, p.bk);
    let v = tape.affine(keys, p.wv, p.bv);
    let scale = 1.0 / (head_dim as f64).sqrt();
    let outs: Vec<Var> = (0..heads)
        .map(|h| {
            let qh = tape.slice_cols(q, h * head_dim, head_dim);
            let kh = tape.slice_cols(k, h * head_dim, head_dim);
            let vh = tape.slice_cols(v, h * head_dim, head_dim);
            let scores = tape.matmul_nt(qh, kh);
            let scores = tape.scale(scores, scale);
            let weights = tape.masked_softmax(scores, key_mask);
            tape.matmul(weights, vh)
        })
        .collect();
    let joined = if outs.len() == 1 {
        outs[0]
    } else {
        tape.concat_cols(&outs)
    };
    tape.affine(joined, p.wo, p.bo)
}

impl SequenceEncoder {
    /// Registers all encoder parameters in `store` in a fixed order.
    pub fn new<R: Rng>(
        config: EncoderConfig,
        vocab: &Vocabularies,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_dim;
        let poi_emb = store.add(
            "embed.poi",
            uniform(rng, vocab.poi_count() + 2, config.poi_embed_dim, 0.5),
        );
        let cat_emb = store.add(
            "embed.category",
            uniform(rng, vocab.category_count() + 2, config.category_embed_dim, 0.5),
        );
        let time_emb = store.add(
            "embed.time",
            uniform(rng, HOURS_PER_WEEK + 1, config.temporal_embed_dim, 0.5),
        );
        let layers = (0..config.num_layers)
            .map(|l| {
                let name = format!("layer{l}");
                LayerParams {
                    attn: attention(store, rng, &format!("{name}.attn"), h),
                    ln1: norm(store, &format!("{name}.ln1"), h),
                    ff1: linear(store, rng, &format!("{name}.ff1"), h, config.feedforward_dim()),
                    ff2: linear(store, rng, &format!("{name}.ff2"), config.feedforward_dim(), h),
                    ln2: norm(store, &format!("{name}.ln2"), h),
                }
            })
            .collect();
        let fuse = attention(store, rng, "social.attn", h);
        let fuse_ln = norm(store, "social.ln", h);
        Ok(SequenceEncoder {
            config,
            poi_emb,
            cat_emb,
            time_emb,
            layers,
            fuse,
            fuse_ln,
            positional: sinusoidal_positions(config.window_length, h),
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Records the encoder on `tape`; returns the `1 × hidden` state at the
    /// last (most recent) position.
    pub fn encode(&self, tape: &mut Tape, window: &VisitWindow) -> Result<Var> {
        let w = self.config.window_length;
        if window.len() != w {
            return Err(Error::contract(format!(
                "window length {} != configured {w}",
                window.len()
            )));
        }
        if !window.mask.iter().any(|&m| m) {
            return Err(Error::contract("window has no real visit"));
        }
        if !window.mask[w - 1] {
            return Err(Error::contract("window must end on a real visit"));
        }
        let poi = tape.embed(self.poi_emb, &window.poi_indices);
        let cat = tape.embed(self.cat_emb, &window.category_indices);
        let time = tape.embed(self.time_emb, &window.temporal_indices);
        let x = tape.concat_cols(&[poi, cat, time]);
        let pos = tape.input(self.positional.clone());
        let mut x = tape.add(x, pos);

        let heads = self.config.num_attention_heads;
        let last = self.layers.len() - 1;
        for (l, p) in self.layers.iter().enumerate() {
            // Only the final position is read out, so the last layer needs
            // just that query row.
            let q = if l == last { tape.row(x, w - 1) } else { x };
            let a = multi_head_attention(tape, &p.attn, q, x, &window.mask, heads);
            let r = tape.add(q, a);
            let y = tape.layer_norm(r, p.ln1.0, p.ln1.1);
            let f = tape.affine(y, p.ff1.0, p.ff1.1);
            let f = tape.gelu(f);
            let f = tape.affine(f, p.ff2.0, p.ff2.1);
            let r = tape.add(y, f);
            x = tape.layer_norm(r, p.ln2.0, p.ln2.1);
        }
        Ok(x)
    }

    /// Attention of the user's own state (query) over itself and its
    /// neighbours' states (keys/values), with a residual connection.
    pub fn fuse(&self, tape: &mut Tape, own: Var, neighbors: &[ContextVector]) -> Result<Var> {
        let h = self.config.hidden_dim;
        if tape.value(own).dim() != (1, h) {
            return Err(Error::contract(format!(
                "own vector shape {:?}, expected (1, {h})",
                tape.value(own).dim()
            )));
        }
        let mut rows = vec![own];
        for n in neighbors {
            if n.len() != h {
                return Err(Error::contract(format!(
                    "neighbour vector length {} != hidden {h}",
                    n.len()
                )));
            }
            rows.push(tape.input(n.as_row()));
        }
        let keys = if rows.len() == 1 {
            own
        } else {
            tape.concat_rows(&rows)
        };
        let mask = vec![true; rows.len()];
        let a = multi_head_attention(
            tape,
            &self.fuse,
            own,
            keys,
            &mask,
            self.config.num_attention_heads,
        );
        let r = tape.add(own, a);
        Ok(tape.layer_norm(r, self.fuse_ln.0, self.fuse_ln.1))
    }

    /// Inference-mode encoding of one window.
    pub fn encode_sequence(&self, params: &ParamStore, window: &VisitWindow) -> Result<ContextVector> {
        let mut tape = Tape::new(params);
        let v = self.encode(&mut tape, window)?;
        ContextVector::from_row(tape.value(v))
    }

    /// Inference-mode social fusion.
    pub fn fuse_social(
        &self,
        params: &ParamStore,
        own: &ContextVector,
        neighbors: &[ContextVector],
    ) -> Result<ContextVector> {
        let mut tape = Tape::new(params);
        let o = tape.input(own.as_row());
        let v = self.fuse(&mut tape, o, neighbors)?;
        ContextVector::from_row(tape.value(v))
    }
}
