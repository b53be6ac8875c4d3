use crate::error::{Error, Result};

/// 1-based rank of the gold candidate under descending score; ties go to
/// the lower candidate index.
pub fn gold_rank(scores: &[f64], gold_index: usize) -> Result<usize> {
    if gold_index >= scores.len() {
        return Err(Error::IndexOutOfRange {
            index: gold_index,
            len: scores.len(),
        });
    }
    let g = scores[gold_index];
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| s > g || (s == g && i < gold_index))
        .count();
    Ok(ahead + 1)
}

pub fn hits_at_n(scores: &[f64], gold_index: usize, n: usize) -> Result<bool> {
    if n == 0 || n > scores.len() {
        return Err(Error::invalid(format!(
            "N = {n} outside 1..={} candidates",
            scores.len()
        )));
    }
    Ok(gold_rank(scores, gold_index)? <= n)
}

/// Fraction of examples whose gold rank is within `n`.
pub fn hits_rate(ranks: &[usize], n: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().filter(|&&r| r <= n).count() as f64 / ranks.len() as f64
}

/// Per-class F1 averaged with weights equal to each class's share of the
/// true labels. A class with no true and no predicted positives scores 0.
pub fn weighted_f1(predictions: &[usize], golds: &[usize], num_classes: usize) -> Result<f64> {
    if predictions.len() != golds.len() {
        return Err(Error::DimensionMismatch {
            expected: golds.len(),
            actual: predictions.len(),
        });
    }
    if golds.is_empty() {
        return Err(Error::invalid("weighted F1 of zero examples"));
    }
    let mut tp = vec![0usize; num_classes];
    let mut pred = vec![0usize; num_classes];
    let mut truth = vec![0usize; num_classes];
    for (&p, &g) in predictions.iter().zip(golds) {
        if p >= num_classes || g >= num_classes {
            return Err(Error::IndexOutOfRange {
                index: p.max(g),
                len: num_classes,
            });
        }
        pred[p] += 1;
        truth[g] += 1;
        if p == g {
            tp[g] += 1;
        }
    }
    let total = golds.len() as f64;
    let mut score = 0.0;
    for c in 0..num_classes {
        if truth[c] == 0 {
            continue;
        }
        // 2PR/(P+R) in count form
        let f1 = 2.0 * tp[c] as f64 / (pred[c] + truth[c]) as f64;
        score += truth[c] as f64 / total * f1;
    }
    Ok(score)
}
