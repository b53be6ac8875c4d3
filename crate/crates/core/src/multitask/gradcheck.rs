//! Central finite-difference verification of the analytic gradients.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::context::TrainingExample;
use super::model::{batch_objective, BiEncoder, LossWeights};
use crate::encoder::{EncoderConfig, CLS};
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Rank,
    Cls,
    Joint,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Rank, LossKind::Cls, LossKind::Joint];

    pub fn weights(self) -> LossWeights {
        match self {
            LossKind::Rank => LossWeights { rank: 1.0, cls: 0.0 },
            LossKind::Cls => LossWeights { rank: 0.0, cls: 1.0 },
            LossKind::Joint => LossWeights { rank: 0.5, cls: 0.5 },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Rank => "rank",
            LossKind::Cls => "cls",
            LossKind::Joint => "joint",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rank" => Ok(LossKind::Rank),
            "cls" => Ok(LossKind::Cls),
            "joint" => Ok(LossKind::Joint),
            other => Err(Error::invalid(format!("unknown loss `{other}`"))),
        }
    }
}

/// Which tensors the sample is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamScope {
    All,
    Encoders,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub samples: usize,
    /// Tensor name, entry, analytic and numeric value at the worst entry.
    pub worst: Option<(String, usize, f64, f64)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Compares analytic gradients with `(f(θ+ε) − f(θ−ε)) / 2ε` on up to
/// `per_tensor` random entries of every tensor in scope.
pub fn check_gradients(
    model: &mut BiEncoder,
    batch: &[TrainingExample],
    weights: LossWeights,
    epsilon: f64,
    scope: ParamScope,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    check_gradients_with_dropout(model, batch, weights, epsilon, scope, per_tensor, seed, None)
}

/// As [`check_gradients`], with fixed dropout masks drawn from
/// `dropout_seed`; the loss is then a smooth function of the parameters.
#[allow(clippy::too_many_arguments)]
pub fn check_gradients_with_dropout(
    model: &mut BiEncoder,
    batch: &[TrainingExample],
    weights: LossWeights,
    epsilon: f64,
    scope: ParamScope,
    per_tensor: usize,
    seed: u64,
    dropout_seed: Option<u64>,
) -> Result<GradCheckReport> {
    let refs: Vec<&TrainingExample> = batch.iter().collect();
    let mut grads = model.zero_grads();
    let base = batch_objective(model, &refs, weights, dropout_seed, Some(&mut grads))?;
    if !base.l_total.is_finite() {
        return Err(Error::NonFinite(format!("loss {}", base.l_total)));
    }
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, _, v)| (n, v.to_vec()))
        .collect();

    let mut rng = rng_for(seed, &[0x6c]);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        samples: 0,
        worst: None,
    };
    for (t, (name, ga)) in analytic.iter().enumerate() {
        if scope == ParamScope::Encoders && name.starts_with("head.") {
            continue;
        }
        if structurally_zero(name, model.config().num_layers) {
            continue;
        }
        let picks = sample(&mut rng, ga.len(), per_tensor.min(ga.len())).into_vec();
        for o in picks {
            let orig = model.tensors_mut()[t][o];
            model.tensors_mut()[t][o] = orig + epsilon;
            let plus = batch_objective(model, &refs, weights, dropout_seed, None)?.l_total;
            model.tensors_mut()[t][o] = orig - epsilon;
            let minus = batch_objective(model, &refs, weights, dropout_seed, None)?.l_total;
            model.tensors_mut()[t][o] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!("loss near {name}[{o}]")));
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            let err = relative_error(ga[o], numeric);
            report.samples += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((name.clone(), o, ga[o], numeric));
            }
        }
    }
    Ok(report)
}

/// Tensors whose gradient is identically zero by an invariance of the
/// objective; a finite difference there measures only roundoff. Key biases
/// shift every score of a softmax row equally, and the candidate tower's
/// final bias shifts all in-batch candidates by the same vector, which the
/// ranking softmax cancels.
pub fn structurally_zero(name: &str, num_layers: usize) -> bool {
    name.ends_with(".bk") || name == format!("candidate.layer{}.ln2_bias", num_layers - 1)
}

const TOY_VOCAB: usize = 24;
const TOY_CHARACTERS: usize = 4;
const PERTURBATION: f64 = 0.3;

/// A random batch of three toy examples within `config.max_seq_len`.
pub fn toy_batch(config: &EncoderConfig, seed: u64) -> Vec<TrainingExample> {
    let mut rng = rng_for(seed, &[0x7b]);
    let max = config.max_seq_len.max(2);
    (0..3)
        .map(|i| {
            let mut seq = |lo: usize| {
                let len = rng.random_range(lo.min(max)..=max);
                let mut ids = vec![CLS];
                ids.extend((1..len).map(|_| rng.random_range(4..TOY_VOCAB)));
                ids
            };
            let context = seq(3);
            let response = seq(2);
            TrainingExample {
                context,
                response,
                speaker: rng.random_range(0..TOY_CHARACTERS),
                chunk_index: 0,
                turn_index: i,
                chunk_id: format!("toy{i}"),
            }
        })
        .collect()
}

/// Gradient check of one loss on a toy model with dropout disabled.
///
/// Every parameter gets uniform noise of width `PERTURBATION` on top of
/// its initial value. At the 0.02-scale init attention is almost uniform
/// and key/query gradients sit far below the 1e-8 error floor, where
/// finite-difference roundoff dominates.
pub fn grad_check(config: &EncoderConfig, loss: LossKind, epsilon: f64, seed: u64) -> Result<GradCheckReport> {
    let cfg = EncoderConfig {
        dropout: 0.0,
        attention_dropout: 0.0,
        ..*config
    };
    let mut model = BiEncoder::new(cfg, TOY_VOCAB, TOY_CHARACTERS, seed)?;
    let mut rng = rng_for(seed, &[0x4ead]);
    for t in model.tensors_mut() {
        for x in t.iter_mut() {
            *x += rng.random_range(-PERTURBATION..PERTURBATION);
        }
    }
    let batch = toy_batch(&cfg, seed);
    check_gradients(&mut model, &batch, loss.weights(), epsilon, ParamScope::All, 8, seed)
}
