//! Post-norm transformer encoder: forward pass with cached activations and
//! the matching reverse-mode backward pass.
//!
//! Masked (PAD) positions are dropped before the first layer instead of being
//! carried through with `-inf` scores; the two are equivalent for every kept
//! position. The last layer only evaluates the pooled query row, since
//! nothing downstream reads the others.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{EncoderConfig, EncoderParams, LayerParams, PAD};
use crate::error::{Error, Result};
use crate::rng::rng_for;

const LN_EPS: f64 = 1e-12;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_K: f64 = 0.044_715;

/// GELU, tanh approximation.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

/// Keeps the leading (pooled) token plus the most recent `max_len - 1` tokens.
pub fn truncate_recent(ids: &[usize], max_len: usize) -> Vec<usize> {
    if ids.len() <= max_len || ids.is_empty() {
        return ids.to_vec();
    }
    let mut out = Vec::with_capacity(max_len);
    out.push(ids[0]);
    out.extend_from_slice(&ids[ids.len() - (max_len - 1)..]);
    out
}

struct NormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, gain: &Array1<f64>, bias: &Array1<f64>) -> (Array2<f64>, NormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *inv = 1.0 / (var + LN_EPS).sqrt();
        let scale = *inv;
        row.mapv_inplace(|v| v * scale);
    }
    let y = &xhat * gain + bias;
    (y, NormCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &NormCache,
    gain: &Array1<f64>,
    d_gain: &mut Array1<f64>,
    d_bias: &mut Array1<f64>,
) -> Array2<f64> {
    *d_gain += &(dy * &cache.xhat).sum_axis(Axis(0));
    *d_bias += &dy.sum_axis(Axis(0));
    let d = dy.ncols() as f64;
    let mut dx = dy * gain;
    for ((mut row, xhat), &inv) in dx
        .rows_mut()
        .into_iter()
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let mean_d = row.sum() / d;
        let mean_dx = row.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / d;
        for (v, &xh) in row.iter_mut().zip(xhat) {
            *v = inv * (*v - mean_d - xh * mean_dx);
        }
    }
    dx
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Inverted-dropout keep mask (entries 0 or 1/(1-p)); `None` when inactive.
fn dropout_mask(rng: &mut Option<ChaCha8Rng>, shape: (usize, usize), p: f64) -> Option<Array2<f64>> {
    let rng = rng.as_mut()?;
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(Array2::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < p {
            0.0
        } else {
            keep
        }
    }))
}

/// Cached activations of one block.
pub struct LayerTrace {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Attention distribution per head, `queries × keys`, before dropout.
    pub probs: Vec<Array2<f64>>,
    attn_masks: Option<Vec<Array2<f64>>>,
    context: Array2<f64>,
    attn_out_mask: Option<Array2<f64>>,
    ln1: NormCache,
    hidden: Array2<f64>,
    ffn_pre: Array2<f64>,
    ffn_act: Array2<f64>,
    ffn_mask: Option<Array2<f64>>,
    ln2: NormCache,
}

pub struct ForwardTrace {
    ids: Vec<usize>,
    positions: Vec<usize>,
    emb_mask: Option<Array2<f64>>,
    pub layers: Vec<LayerTrace>,
    output: Array2<f64>,
}

impl ForwardTrace {
    pub fn pooled(&self) -> Vec<f64> {
        self.output.row(0).to_vec()
    }

    /// Token ids that survived masking, in order.
    pub fn kept_ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub params: EncoderParams,
}

impl Encoder {
    pub fn new(config: EncoderConfig, vocab_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Encoder {
            config,
            params: EncoderParams::init(&config, vocab_size, seed),
        })
    }

    pub fn from_params(config: EncoderConfig, params: EncoderParams) -> Result<Self> {
        config.validate()?;
        let shape_ok = params.layers.len() == config.num_layers
            && params.position_embedding.shape() == [config.max_seq_len, config.embed_dim]
            && params.token_embedding.ncols() == config.embed_dim
            && params.layers.iter().all(|l| l.w1.shape() == [config.embed_dim, config.ffn_dim]);
        if !shape_ok {
            return Err(Error::Config("parameter shapes do not match the encoder config".into()));
        }
        Ok(Encoder { config, params })
    }

    pub fn vocab_size(&self) -> usize {
        self.params.vocab_size()
    }

    /// Pooled representation; dropout only in `train_mode`, seeded by
    /// `rng_seed`.
    pub fn encode(&self, token_ids: &[usize], train_mode: bool, rng_seed: u64) -> Result<Vec<f64>> {
        let seed = train_mode.then_some(rng_seed);
        Ok(self.forward(token_ids, None, seed)?.pooled())
    }

    /// Full forward pass. `mask[i] == false` hides position `i` from
    /// attention regardless of its token; without a mask, PAD tokens are
    /// hidden. Position 0 is always kept.
    pub fn forward(
        &self,
        token_ids: &[usize],
        mask: Option<&[bool]>,
        dropout_seed: Option<u64>,
    ) -> Result<ForwardTrace> {
        let cfg = &self.config;
        if token_ids.is_empty() {
            return Err(Error::invalid("cannot encode an empty sequence"));
        }
        if token_ids.len() > cfg.max_seq_len {
            return Err(Error::SequenceTooLong {
                len: token_ids.len(),
                max: cfg.max_seq_len,
            });
        }
        if let Some(m) = mask {
            if m.len() != token_ids.len() {
                return Err(Error::DimensionMismatch {
                    expected: token_ids.len(),
                    actual: m.len(),
                });
            }
        }
        let vocab = self.vocab_size();
        let mut ids = Vec::with_capacity(token_ids.len());
        let mut raw_positions = Vec::with_capacity(token_ids.len());
        for (i, &id) in token_ids.iter().enumerate() {
            let visible = i == 0 || mask.map_or(id != PAD, |m| m[i]);
            if !visible {
                continue;
            }
            if id >= vocab {
                return Err(Error::TokenOutOfRange { id, vocab_size: vocab });
            }
            ids.push(id);
            raw_positions.push(i);
        }
        let n = ids.len();
        let positions: Vec<usize> = if cfg.right_align_positions {
            (0..n)
                .map(|k| if k == 0 { 0 } else { cfg.max_seq_len - n + k })
                .collect()
        } else {
            raw_positions
        };

        let mut rng = dropout_seed.map(|s| rng_for(s, &[0xd209]));
        let d = cfg.embed_dim;
        let mut x = Array2::zeros((n, d));
        for (i, (&id, &pos)) in ids.iter().zip(&positions).enumerate() {
            let row = &self.params.token_embedding.row(id) + &self.params.position_embedding.row(pos);
            x.row_mut(i).assign(&row);
        }
        let emb_mask = dropout_mask(&mut rng, (n, d), cfg.dropout);
        if let Some(m) = &emb_mask {
            x *= m;
        }

        let mut layers = Vec::with_capacity(cfg.num_layers);
        let last = cfg.num_layers - 1;
        for (l, p) in self.params.layers.iter().enumerate() {
            let nq = if l == last { 1 } else { n };
            let (out, trace) = layer_forward(p, cfg, x, nq, &mut rng);
            layers.push(trace);
            x = out;
        }
        Ok(ForwardTrace {
            ids,
            positions,
            emb_mask,
            layers,
            output: x,
        })
    }

    /// Accumulates into `grads` the gradient of a scalar whose derivative
    /// with respect to the pooled vector is `d_pooled`.
    pub fn backward(&self, trace: &ForwardTrace, d_pooled: &[f64], grads: &mut EncoderParams) {
        let d = self.config.embed_dim;
        assert_eq!(d_pooled.len(), d, "pooled gradient has wrong width");
        let mut dx = Array2::from_shape_vec((1, d), d_pooled.to_vec()).expect("shape");
        for ((p, t), g) in self
            .params
            .layers
            .iter()
            .zip(&trace.layers)
            .zip(grads.layers.iter_mut())
            .rev()
        {
            dx = layer_backward(p, &self.config, t, dx, g);
        }
        if let Some(m) = &trace.emb_mask {
            dx *= m;
        }
        for (i, (&id, &pos)) in trace.ids.iter().zip(&trace.positions).enumerate() {
            let row = dx.row(i);
            let mut tok = grads.token_embedding.row_mut(id);
            tok += &row;
            let mut pe = grads.position_embedding.row_mut(pos);
            pe += &row;
        }
    }
}

fn layer_forward(
    p: &LayerParams,
    cfg: &EncoderConfig,
    x: Array2<f64>,
    nq: usize,
    rng: &mut Option<ChaCha8Rng>,
) -> (Array2<f64>, LayerTrace) {
    let n = x.nrows();
    let d = cfg.embed_dim;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let xq: ArrayView2<f64> = x.slice(s![..nq, ..]);
    let q = xq.dot(&p.wq) + &p.bq;
    let k = x.dot(&p.wk) + &p.bk;
    let v = x.dot(&p.wv) + &p.bv;

    let mut context = Array2::zeros((nq, d));
    let mut probs = Vec::with_capacity(cfg.num_heads);
    let mut masks = Vec::new();
    for h in 0..cfg.num_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t());
        scores *= scale;
        softmax_rows(&mut scores);
        let head_ctx = match dropout_mask(rng, (nq, n), cfg.attention_dropout) {
            Some(m) => {
                let out = (&scores * &m).dot(&v.slice(cols));
                masks.push(m);
                out
            }
            None => scores.dot(&v.slice(cols)),
        };
        context.slice_mut(cols).assign(&head_ctx);
        probs.push(scores);
    }
    let attn_masks = (!masks.is_empty()).then_some(masks);

    let mut attn = context.dot(&p.wo) + &p.bo;
    let attn_out_mask = dropout_mask(rng, (nq, d), cfg.dropout);
    if let Some(m) = &attn_out_mask {
        attn *= m;
    }
    let r1 = &xq + &attn;
    let (hidden, ln1) = layer_norm(&r1, &p.ln1_gain, &p.ln1_bias);

    let ffn_pre = hidden.dot(&p.w1) + &p.b1;
    let ffn_act = ffn_pre.mapv(gelu);
    let mut ffn_out = ffn_act.dot(&p.w2) + &p.b2;
    let ffn_mask = dropout_mask(rng, (nq, d), cfg.dropout);
    if let Some(m) = &ffn_mask {
        ffn_out *= m;
    }
    let r2 = &hidden + &ffn_out;
    let (out, ln2) = layer_norm(&r2, &p.ln2_gain, &p.ln2_bias);

    let trace = LayerTrace {
        input: x,
        q,
        k,
        v,
        probs,
        attn_masks,
        context,
        attn_out_mask,
        ln1,
        hidden,
        ffn_pre,
        ffn_act,
        ffn_mask,
        ln2,
    };
    (out, trace)
}

fn layer_backward(
    p: &LayerParams,
    cfg: &EncoderConfig,
    t: &LayerTrace,
    d_out: Array2<f64>,
    g: &mut LayerParams,
) -> Array2<f64> {
    let n = t.input.nrows();
    let nq = d_out.nrows();
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let d_r2 = layer_norm_backward(&d_out, &t.ln2, &p.ln2_gain, &mut g.ln2_gain, &mut g.ln2_bias);
    let mut d_hidden = d_r2.clone();
    let mut d_ffn = d_r2;
    if let Some(m) = &t.ffn_mask {
        d_ffn *= m;
    }
    g.b2 += &d_ffn.sum_axis(Axis(0));
    g.w2 += &t.ffn_act.t().dot(&d_ffn);
    let mut d_pre = d_ffn.dot(&p.w2.t());
    d_pre.zip_mut_with(&t.ffn_pre, |dv, &x| *dv *= gelu_grad(x));
    g.b1 += &d_pre.sum_axis(Axis(0));
    g.w1 += &t.hidden.t().dot(&d_pre);
    d_hidden += &d_pre.dot(&p.w1.t());

    let d_r1 = layer_norm_backward(&d_hidden, &t.ln1, &p.ln1_gain, &mut g.ln1_gain, &mut g.ln1_bias);
    let mut dx = Array2::zeros((n, cfg.embed_dim));
    {
        let mut top = dx.slice_mut(s![..nq, ..]);
        top += &d_r1;
    }
    let mut d_attn = d_r1;
    if let Some(m) = &t.attn_out_mask {
        d_attn *= m;
    }
    g.bo += &d_attn.sum_axis(Axis(0));
    g.wo += &t.context.t().dot(&d_attn);
    let d_context = d_attn.dot(&p.wo.t());

    let mut d_q = Array2::zeros((nq, cfg.embed_dim));
    let mut d_k = Array2::zeros((n, cfg.embed_dim));
    let mut d_v = Array2::zeros((n, cfg.embed_dim));
    for h in 0..cfg.num_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let probs = &t.probs[h];
        let mask = t.attn_masks.as_ref().map(|m| &m[h]);
        let d_ctx = d_context.slice(cols);
        {
            let used = match mask {
                Some(m) => probs * m,
                None => probs.clone(),
            };
            let mut dv = d_v.slice_mut(cols);
            dv += &used.t().dot(&d_ctx);
        }
        let mut d_probs = d_ctx.dot(&t.v.slice(cols).t());
        if let Some(m) = mask {
            d_probs *= m;
        }
        let row_dot = (&d_probs * probs).sum_axis(Axis(1)).insert_axis(Axis(1));
        let mut d_scores = probs * &(d_probs - &row_dot);
        d_scores *= scale;
        {
            let mut dq = d_q.slice_mut(cols);
            dq += &d_scores.dot(&t.k.slice(cols));
        }
        let mut dk = d_k.slice_mut(cols);
        dk += &d_scores.t().dot(&t.q.slice(cols));
    }

    let xq = t.input.slice(s![..nq, ..]);
    g.wq += &xq.t().dot(&d_q);
    g.bq += &d_q.sum_axis(Axis(0));
    g.wk += &t.input.t().dot(&d_k);
    g.bk += &d_k.sum_axis(Axis(0));
    g.wv += &t.input.t().dot(&d_v);
    g.bv += &d_v.sum_axis(Axis(0));
    {
        let mut top = dx.slice_mut(s![..nq, ..]);
        top += &d_q.dot(&p.wq.t());
    }
    dx += &d_k.dot(&p.wk.t());
    dx += &d_v.dot(&p.wv.t());
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Encoder {
        Encoder::new(EncoderConfig::toy(), 12, 3).unwrap()
    }

    #[test]
    fn output_width_and_determinism() {
        let enc = toy();
        let a = enc.encode(&[3, 5, 6, 7], false, 0).unwrap();
        let b = enc.encode(&[3, 5, 6, 7], false, 99).unwrap();
        assert_eq!(a.len(), 16);
        assert_eq!(a, b);
        let c = enc.encode(&[3, 5, 6, 7], true, 1).unwrap();
        let d = enc.encode(&[3, 5, 6, 7], true, 1).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn dropout_changes_output_in_train_mode() {
        let mut cfg = EncoderConfig::toy();
        cfg.dropout = 0.3;
        cfg.attention_dropout = 0.3;
        let enc = Encoder::new(cfg, 12, 3).unwrap();
        let eval = enc.encode(&[3, 5, 6, 7], false, 1).unwrap();
        let train = enc.encode(&[3, 5, 6, 7], true, 1).unwrap();
        assert_ne!(eval, train);
    }

    #[test]
    fn errors() {
        let enc = toy();
        assert!(matches!(
            enc.encode(&[3; 9], false, 0),
            Err(Error::SequenceTooLong { len: 9, max: 8 })
        ));
        assert!(matches!(
            enc.encode(&[3, 12], false, 0),
            Err(Error::TokenOutOfRange { id: 12, .. })
        ));
        assert!(enc.encode(&[], false, 0).is_err());
    }

    #[test]
    fn pad_positions_are_ignored() {
        let mut cfg = EncoderConfig::toy();
        cfg.right_align_positions = false;
        let enc = Encoder::new(cfg, 12, 3).unwrap();
        let base = enc.encode(&[3, 5, 6, PAD, PAD, PAD], false, 0).unwrap();
        let mask = [true, true, true, false, false, false];
        for filler in [1usize, 7, 11] {
            let ids = [3, 5, 6, filler, filler, 9];
            let out = enc.forward(&ids, Some(&mask), None).unwrap().pooled();
            assert_eq!(out, base);
        }
        assert_eq!(enc.encode(&[3, 5, 6], false, 0).unwrap(), base);
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let enc = toy();
        let trace = enc.forward(&[3, 4, 5, 6, 7, 8], None, None).unwrap();
        for layer in &trace.layers {
            for probs in &layer.probs {
                for row in probs.rows() {
                    assert!((row.sum() - 1.0).abs() < 1e-12);
                }
            }
        }
        assert_eq!(trace.layers[0].probs[0].shape(), &[6, 6]);
        assert_eq!(trace.layers[1].probs[0].shape(), &[1, 6]);
    }

    #[test]
    fn right_aligned_positions() {
        let enc = toy();
        let trace = enc.forward(&[3, 4, 5], None, None).unwrap();
        assert_eq!(trace.positions(), &[0, 6, 7]);
    }

    #[test]
    fn truncation_keeps_leading_and_recent() {
        assert_eq!(truncate_recent(&[9, 1, 2, 3, 4, 5], 4), vec![9, 3, 4, 5]);
        assert_eq!(truncate_recent(&[9, 1], 4), vec![9, 1]);
        assert_eq!(truncate_recent(&[9, 1, 2], 1), vec![9]);
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }
}
