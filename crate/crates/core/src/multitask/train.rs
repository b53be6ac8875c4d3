//! Joint training with in-batch negatives, Adamax and warmup/plateau decay.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::context::{build_examples, ContextConfig, TrainingExample};
use super::loss::LossBreakdown;
use super::model::{batch_objective, BiEncoder, LossWeights};
use super::optim::{Adamax, LrSchedule};
use crate::corpus::Corpus;
use crate::encoder::{EncoderConfig, Vocab};
use crate::error::{Error, Result};
use crate::harness::{evaluate_examples, EvalConfig, EvalResult};
use crate::relations::RelationTable;
use crate::rng::{derive_seed, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub lambda_rank: f64,
    pub lambda_cls: f64,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig::desk()
    }
}

impl TrainingConfig {
    /// The published hyperparameters, meant for a pretrained encoder.
    pub fn published() -> Self {
        TrainingConfig {
            lambda_rank: 0.5,
            lambda_cls: 0.5,
            learning_rate: 5e-5,
            warmup_steps: 100,
            lr_decay: 0.4,
            epochs: 10,
            batch_size: 10,
            seed: 0,
        }
    }

    /// Same shape, with a rate that can move a randomly initialised
    /// encoder within ten epochs.
    pub fn desk() -> Self {
        TrainingConfig {
            learning_rate: 2e-3,
            warmup_steps: 50,
            ..TrainingConfig::published()
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            rank: self.lambda_rank,
            cls: self.lambda_cls,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.lambda_rank >= 0.0 && self.lambda_cls >= 0.0) {
            return bad("loss weights must be non-negative");
        }
        if self.lambda_rank == 0.0 && self.lambda_cls == 0.0 {
            return bad("at least one loss weight must be positive");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be >= 2 for in-batch negatives");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub l_rank: f64,
    pub l_cls: f64,
    pub l_total: f64,
    pub val_hits1: f64,
    pub val_f1: f64,
    pub lr: f64,
}

pub const METRICS_HEADER: &str = "epoch\tl_rank\tl_cls\tl_total\tval_hits1\tval_f1\tlr";

pub fn metrics_tsv(log: &[EpochMetrics]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for m in log {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            m.epoch, m.l_rank, m.l_cls, m.l_total, m.val_hits1, m.val_f1, m.lr
        );
    }
    out
}

/// A bi-encoder together with everything needed to feed it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub context_config: ContextConfig,
    pub vocab: Vocab,
    pub model: BiEncoder,
}

impl TrainedModel {
    pub fn encoder_config(&self) -> &EncoderConfig {
        self.model.config()
    }

    pub fn examples(&self, corpus: &Corpus, table: &RelationTable) -> Result<Vec<TrainingExample>> {
        build_examples(
            corpus,
            table,
            &self.context_config,
            &self.vocab,
            self.encoder_config().max_seq_len,
        )
    }

    pub fn evaluate(&self, corpus: &Corpus, table: &RelationTable, cfg: &EvalConfig) -> Result<EvalResult> {
        evaluate_examples(&self.model, &self.examples(corpus, table)?, cfg)
    }
}

pub struct TrainData<'a> {
    pub train: &'a Corpus,
    pub valid: &'a Corpus,
    pub relations: &'a RelationTable,
    pub vocab: &'a Vocab,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: Vec<EpochMetrics>,
    /// Training loss of every optimizer step, dropout included.
    pub step_losses: Vec<LossBreakdown>,
}

fn batches(order: &[usize], size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(size).filter(|b| b.len() >= 2)
}

/// Objective averaged over fixed-order batches of `examples`, without
/// dropout. `None` when no batch of at least two examples can be formed.
pub fn mean_loss(model: &BiEncoder, examples: &[TrainingExample], cfg: &TrainingConfig) -> Result<Option<LossBreakdown>> {
    let order: Vec<usize> = (0..examples.len()).collect();
    let (mut r, mut c, mut t, mut n) = (0.0, 0.0, 0.0, 0usize);
    for b in batches(&order, cfg.batch_size) {
        let refs: Vec<&TrainingExample> = b.iter().map(|&i| &examples[i]).collect();
        let l = batch_objective(model, &refs, cfg.weights(), None, None)?;
        r += l.l_rank;
        c += l.l_cls;
        t += l.l_total;
        n += 1;
    }
    Ok((n > 0).then(|| {
        let k = n as f64;
        LossBreakdown {
            l_rank: r / k,
            l_cls: c / k,
            l_total: t / k,
        }
    }))
}

pub fn train(
    data: &TrainData,
    ctx: &ContextConfig,
    enc: &EncoderConfig,
    cfg: &TrainingConfig,
    eval: &EvalConfig,
) -> Result<TrainOutcome> {
    train_with_progress(data, ctx, enc, cfg, eval, |_| {})
}

/// As [`train`], calling `progress` after every epoch.
pub fn train_with_progress(
    data: &TrainData,
    ctx: &ContextConfig,
    enc: &EncoderConfig,
    cfg: &TrainingConfig,
    eval: &EvalConfig,
    mut progress: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    enc.validate()?;
    ctx.validate()?;
    eval.validate()?;
    let vocab = data.vocab;
    let train_ex = build_examples(data.train, data.relations, ctx, vocab, enc.max_seq_len)?;
    let valid_ex = build_examples(data.valid, data.relations, ctx, vocab, enc.max_seq_len)?;
    if train_ex.len() < 2 {
        return Err(Error::invalid("training split yields fewer than two examples"));
    }
    let can_rank = valid_ex.len() >= eval.num_candidates;

    let mut model = BiEncoder::new(*enc, vocab.len(), vocab.num_characters(), cfg.seed)?;
    let sizes: Vec<usize> = model.tensors().iter().map(|(_, _, v)| v.len()).collect();
    let mut opt = Adamax::new(&sizes);
    let mut sched = LrSchedule::new(cfg.learning_rate, cfg.warmup_steps);
    let mut step = 0usize;
    let mut best = f64::INFINITY;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut step_losses = Vec::new();

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_ex.len()).collect();
        order.shuffle(&mut rng_for(cfg.seed, &[0xe90c, epoch as u64]));
        let (mut r, mut c, mut t, mut n) = (0.0, 0.0, 0.0, 0usize);
        let mut lr = sched.rate(step.max(1));
        for b in batches(&order, cfg.batch_size) {
            step += 1;
            lr = sched.rate(step);
            let refs: Vec<&TrainingExample> = b.iter().map(|&i| &train_ex[i]).collect();
            let mut grads = model.zero_grads();
            let seed = derive_seed(cfg.seed, &[0xd0, step as u64]);
            let loss = batch_objective(&model, &refs, cfg.weights(), Some(seed), Some(&mut grads))?;
            if !loss.l_total.is_finite() {
                return Err(Error::Diverged {
                    step,
                    loss: loss.l_total,
                });
            }
            let g: Vec<&[f64]> = grads.tensors().into_iter().map(|(_, _, v)| v).collect();
            opt.update(model.tensors_mut(), &g, lr);
            step_losses.push(loss);
            r += loss.l_rank;
            c += loss.l_cls;
            t += loss.l_total;
            n += 1;
        }
        let k = n.max(1) as f64;
        let train_loss = LossBreakdown {
            l_rank: r / k,
            l_cls: c / k,
            l_total: t / k,
        };

        let (val_hits1, val_f1) = if can_rank {
            let res = evaluate_examples(&model, &valid_ex, eval)?;
            (res.hits(1), res.weighted_f1)
        } else {
            (f64::NAN, f64::NAN)
        };
        let monitored = match mean_loss(&model, &valid_ex, cfg)? {
            Some(l) => l.l_total,
            None => train_loss.l_total,
        };
        if !monitored.is_finite() {
            return Err(Error::Diverged { step, loss: monitored });
        }
        let metrics = EpochMetrics {
            epoch,
            l_rank: train_loss.l_rank,
            l_cls: train_loss.l_cls,
            l_total: train_loss.l_total,
            val_hits1,
            val_f1,
            lr,
        };
        progress(&metrics);
        log.push(metrics);
        if monitored < best {
            best = monitored;
        } else {
            sched.decay(cfg.lr_decay);
        }
    }

    Ok(TrainOutcome {
        model: TrainedModel {
            context_config: *ctx,
            vocab: vocab.clone(),
            model,
        },
        log,
        step_losses,
    })
}
