use serde::{Deserialize, Serialize};

use super::candidates::{build_candidate_sets, EvalConfig};
use super::metrics::{gold_rank, hits_rate, weighted_f1};
use crate::error::Result;
use crate::multitask::{score_candidates, BiEncoder, TrainingExample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub num_examples: usize,
    pub num_candidates: usize,
    /// 1-based rank of the gold response per example.
    pub gold_ranks: Vec<usize>,
    pub predictions: Vec<usize>,
    pub golds: Vec<usize>,
    pub weighted_f1: f64,
}

impl EvalResult {
    pub fn hits(&self, n: usize) -> f64 {
        hits_rate(&self.gold_ranks, n)
    }
}

/// Scores every example's candidate set with the bi-encoder and predicts
/// its next speaker with the head. Each context and response is encoded
/// once.
pub fn evaluate_examples(model: &BiEncoder, examples: &[TrainingExample], cfg: &EvalConfig) -> Result<EvalResult> {
    let sets = build_candidate_sets(examples, cfg)?;
    let mut contexts = Vec::with_capacity(examples.len());
    let mut responses = Vec::with_capacity(examples.len());
    for ex in examples {
        contexts.push(model.encode_context(&ex.context)?);
        responses.push(model.encode_candidate(&ex.response)?);
    }
    let mut gold_ranks = Vec::with_capacity(sets.len());
    for set in &sets {
        let cands: Vec<Vec<f64>> = set.candidates.iter().map(|&c| responses[c].clone()).collect();
        let scores = score_candidates(&contexts[set.example], &cands)?;
        gold_ranks.push(gold_rank(&scores, set.gold_index)?);
    }
    let predictions = contexts
        .iter()
        .map(|c| model.head.predict(c))
        .collect::<Result<Vec<_>>>()?;
    let golds: Vec<usize> = examples.iter().map(|e| e.speaker).collect();
    let f1 = weighted_f1(&predictions, &golds, model.head.num_characters())?;
    Ok(EvalResult {
        num_examples: examples.len(),
        num_candidates: cfg.num_candidates,
        gold_ranks,
        predictions,
        golds,
        weighted_f1: f1,
    })
}
