//! Context and candidate towers plus the classifier head, and the batch
//! objective with its gradient.

use ndarray::{Array1, Array2, Axis};

use super::context::TrainingExample;
use super::loss::{cross_entropy_with_grad, joint_loss, ClassifierHead, LossBreakdown};
use crate::encoder::{Encoder, EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct BiEncoder {
    pub context: Encoder,
    /// `None` when the towers are tied.
    pub candidate: Option<Encoder>,
    pub head: ClassifierHead,
}

/// Gradient accumulator congruent with [`BiEncoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub context: EncoderParams,
    pub candidate: Option<EncoderParams>,
    pub head: ClassifierHead,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub rank: f64,
    pub cls: f64,
}

impl BiEncoder {
    pub fn new(config: EncoderConfig, vocab_size: usize, num_characters: usize, seed: u64) -> Result<Self> {
        if num_characters == 0 {
            return Err(Error::invalid("classifier needs at least one character"));
        }
        let context = Encoder::new(config, vocab_size, derive_seed(seed, &[1]))?;
        let candidate = if config.tie_towers {
            None
        } else {
            Some(Encoder::new(config, vocab_size, derive_seed(seed, &[2]))?)
        };
        Ok(BiEncoder {
            context,
            candidate,
            head: ClassifierHead::zeros(num_characters, config.embed_dim),
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.context.config
    }

    pub fn candidate_encoder(&self) -> &Encoder {
        self.candidate.as_ref().unwrap_or(&self.context)
    }

    pub fn encode_context(&self, ids: &[usize]) -> Result<Vec<f64>> {
        Ok(self.context.forward(ids, None, None)?.pooled())
    }

    pub fn encode_candidate(&self, ids: &[usize]) -> Result<Vec<f64>> {
        Ok(self.candidate_encoder().forward(ids, None, None)?.pooled())
    }

    pub fn zero_grads(&self) -> ModelGrads {
        ModelGrads {
            context: self.context.params.zeros_like(),
            candidate: self.candidate.as_ref().map(|c| c.params.zeros_like()),
            head: ClassifierHead::zeros(self.head.num_characters(), self.head.embed_dim()),
        }
    }

    /// Named parameter tensors: context tower, candidate tower, head.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<_> = self
            .context
            .params
            .tensors()
            .into_iter()
            .map(|(n, s, v)| (format!("context.{n}"), s, v))
            .collect();
        if let Some(c) = &self.candidate {
            out.extend(c.params.tensors().into_iter().map(|(n, s, v)| (format!("candidate.{n}"), s, v)));
        }
        out.extend(head_tensors(&self.head));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.context.params.tensors_mut();
        if let Some(c) = &mut self.candidate {
            out.extend(c.params.tensors_mut());
        }
        out.push(self.head.weight.as_slice_mut().expect("standard layout"));
        out.push(self.head.bias.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, v)| v.iter().all(|x| x.is_finite()))
    }
}

fn head_tensors(head: &ClassifierHead) -> Vec<(String, Vec<usize>, &[f64])> {
    vec![
        (
            "head.weight".to_string(),
            head.weight.shape().to_vec(),
            head.weight.as_slice().expect("standard layout"),
        ),
        (
            "head.bias".to_string(),
            head.bias.shape().to_vec(),
            head.bias.as_slice().expect("standard layout"),
        ),
    ]
}

impl ModelGrads {
    /// Same order as [`BiEncoder::tensors`].
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<_> = self
            .context
            .tensors()
            .into_iter()
            .map(|(n, s, v)| (format!("context.{n}"), s, v))
            .collect();
        if let Some(c) = &self.candidate {
            out.extend(c.tensors().into_iter().map(|(n, s, v)| (format!("candidate.{n}"), s, v)));
        }
        out.extend(head_tensors(&self.head));
        out
    }
}

fn rows(vs: &[Vec<f64>]) -> Array2<f64> {
    let d = vs[0].len();
    Array2::from_shape_vec((vs.len(), d), vs.concat()).expect("rows of equal width")
}

/// Loss of one batch under in-batch negatives and, if `grads` is given,
/// accumulation of its gradient. Example `i`'s candidates are the gold
/// responses of the whole batch with gold index `i`. Dropout is active
/// iff `dropout_seed` is set.
pub fn batch_objective(
    model: &BiEncoder,
    batch: &[&TrainingExample],
    weights: LossWeights,
    dropout_seed: Option<u64>,
    grads: Option<&mut ModelGrads>,
) -> Result<LossBreakdown> {
    let b = batch.len();
    if b < 2 {
        return Err(Error::invalid("a batch needs at least two examples"));
    }
    let seed_for = |i: usize, tower: u64| dropout_seed.map(|s| derive_seed(s, &[i as u64, tower]));
    let cand_enc = model.candidate_encoder();

    let mut ctx_traces = Vec::with_capacity(b);
    let mut resp_traces = Vec::with_capacity(b);
    for (i, ex) in batch.iter().enumerate() {
        ctx_traces.push(model.context.forward(&ex.context, None, seed_for(i, 0))?);
        resp_traces.push(cand_enc.forward(&ex.response, None, seed_for(i, 1))?);
    }
    let c = rows(&ctx_traces.iter().map(|t| t.pooled()).collect::<Vec<_>>());
    let r = rows(&resp_traces.iter().map(|t| t.pooled()).collect::<Vec<_>>());

    let scores = c.dot(&r.t());
    let logits = c.dot(&model.head.weight.t()) + &model.head.bias;
    let mut d_scores = Array2::zeros((b, b));
    let mut d_logits = Array2::zeros(logits.raw_dim());
    let (mut l_rank, mut l_cls) = (0.0, 0.0);
    for (i, ex) in batch.iter().enumerate() {
        if ex.speaker >= model.head.num_characters() {
            return Err(Error::IndexOutOfRange {
                index: ex.speaker,
                len: model.head.num_characters(),
            });
        }
        let (lr, gr) = cross_entropy_with_grad(scores.row(i).as_slice().expect("row"), i)?;
        let (lc, gc) = cross_entropy_with_grad(logits.row(i).as_slice().expect("row"), ex.speaker)?;
        l_rank += lr;
        l_cls += lc;
        d_scores.row_mut(i).assign(&Array1::from(gr));
        d_logits.row_mut(i).assign(&Array1::from(gc));
    }
    let inv = 1.0 / b as f64;
    let out = joint_loss(l_rank * inv, l_cls * inv, weights.rank, weights.cls);

    let Some(grads) = grads else {
        return Ok(out);
    };
    d_scores *= weights.rank * inv;
    d_logits *= weights.cls * inv;

    let d_c = d_scores.dot(&r) + d_logits.dot(&model.head.weight);
    let d_r = d_scores.t().dot(&c);
    grads.head.weight += &d_logits.t().dot(&c);
    grads.head.bias += &d_logits.sum_axis(Axis(0));

    for (i, t) in ctx_traces.iter().enumerate() {
        model.context.backward(t, d_c.row(i).as_slice().expect("row"), &mut grads.context);
    }
    if weights.rank != 0.0 {
        let target = match (&model.candidate, &mut grads.candidate) {
            (Some(_), Some(g)) => g,
            (None, _) => &mut grads.context,
            (Some(_), None) => return Err(Error::invalid("gradient tree lacks a candidate tower")),
        };
        for (i, t) in resp_traces.iter().enumerate() {
            cand_enc.backward(t, d_r.row(i).as_slice().expect("row"), target);
        }
    }
    Ok(out)
}
