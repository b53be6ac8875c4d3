use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dot product of the context vector with each candidate, in order.
pub fn score_candidates(context_vec: &[f64], candidate_vecs: &[Vec<f64>]) -> Result<Vec<f64>> {
    candidate_vecs
        .iter()
        .map(|c| {
            if c.len() != context_vec.len() {
                return Err(Error::DimensionMismatch {
                    expected: context_vec.len(),
                    actual: c.len(),
                });
            }
            Ok(c.iter().zip(context_vec).map(|(a, b)| a * b).sum())
        })
        .collect()
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `-log softmax(scores)[gold]` and its gradient with respect to `scores`.
pub fn cross_entropy_with_grad(scores: &[f64], gold: usize) -> Result<(f64, Vec<f64>)> {
    if gold >= scores.len() {
        return Err(Error::IndexOutOfRange {
            index: gold,
            len: scores.len(),
        });
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    let loss = log_z - scores[gold];
    let mut grad = softmax(scores);
    grad[gold] -= 1.0;
    Ok((loss.max(0.0), grad))
}

/// Softmax cross-entropy of the gold candidate.
pub fn ranking_loss(scores: &[f64], gold_index: usize) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::invalid("ranking needs at least two candidates"));
    }
    Ok(cross_entropy_with_grad(scores, gold_index)?.0)
}

/// Linear next-speaker classifier over the context vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    /// `num_characters × embed_dim`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl ClassifierHead {
    pub fn zeros(num_characters: usize, embed_dim: usize) -> Self {
        ClassifierHead {
            weight: Array2::zeros((num_characters, embed_dim)),
            bias: Array1::zeros(num_characters),
        }
    }

    pub fn num_characters(&self) -> usize {
        self.weight.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn logits(&self, context_vec: &[f64]) -> Result<Vec<f64>> {
        if context_vec.len() != self.embed_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.embed_dim(),
                actual: context_vec.len(),
            });
        }
        let c = ndarray::ArrayView1::from(context_vec);
        Ok((self.weight.dot(&c) + &self.bias).to_vec())
    }

    /// Index of the largest logit, lowest index on ties.
    pub fn predict(&self, context_vec: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(context_vec)?))
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Logits and cross-entropy for the gold speaker.
pub fn character_loss(
    context_vec: &[f64],
    head: &ClassifierHead,
    gold_speaker_id: usize,
) -> Result<(Vec<f64>, f64)> {
    let logits = head.logits(context_vec)?;
    let (loss, _) = cross_entropy_with_grad(&logits, gold_speaker_id)?;
    Ok((logits, loss))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_rank: f64,
    pub l_cls: f64,
    pub l_total: f64,
}

pub fn joint_loss(l_rank: f64, l_cls: f64, lambda_rank: f64, lambda_cls: f64) -> LossBreakdown {
    LossBreakdown {
        l_rank,
        l_cls,
        l_total: lambda_rank * l_rank + lambda_cls * l_cls,
    }
}
