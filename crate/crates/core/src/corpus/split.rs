//! Episode-level train/valid/test partitioning.

use std::collections::HashMap;

use rand::seq::SliceRandom;

use super::Corpus;
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, valid: f64, test: f64) -> Self {
        SplitRatios { train, valid, test }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.valid, self.test]
    }

    fn validate(&self) -> Result<()> {
        let r = self.as_array();
        if r.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid(format!("split ratios must be >= 0: {r:?}")));
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Number of episodes per split: largest-remainder apportionment, with every
/// split that has a positive ratio receiving at least one episode.
fn apportion(ratios: [f64; 3], episodes: usize) -> Result<[usize; 3]> {
    let wanted = ratios.iter().filter(|r| **r > 0.0).count();
    if wanted > episodes {
        return Err(Error::invalid(format!(
            "{episodes} episode(s) cannot fill {wanted} non-empty splits"
        )));
    }
    let raw: Vec<f64> = ratios.iter().map(|r| r * episodes as f64).collect();
    let mut counts = [0usize; 3];
    for i in 0..3 {
        counts[i] = (raw[i] + 1e-9).floor() as usize;
    }
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).filter(|&i| ratios[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - counts[a] as f64;
        let fb = raw[b] - counts[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(episodes.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    for i in 0..3 {
        if ratios[i] > 0.0 && counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| (counts[j], usize::MAX - j)).unwrap();
            counts[donor] -= 1;
            counts[i] = 1;
        }
    }
    Ok(counts)
}

/// Splits by whole episode: shuffles episode ids with `seed`, apportions
/// them by `ratios`, and keeps original chunk order inside each split. All
/// three corpora share the parent's character registry.
pub fn split_corpus(corpus: &Corpus, ratios: SplitRatios, seed: u64) -> Result<[Corpus; 3]> {
    ratios.validate()?;
    let mut episodes: Vec<&str> = corpus.episodes();
    let counts = apportion(ratios.as_array(), episodes.len())?;
    let mut rng = rng_for(seed, &[0x5e11]);
    episodes.shuffle(&mut rng);

    let mut which: HashMap<&str, usize> = HashMap::new();
    let mut cursor = 0;
    for (split, &count) in counts.iter().enumerate() {
        for ep in &episodes[cursor..cursor + count] {
            which.insert(ep, split);
        }
        cursor += count;
    }

    let mut parts: [Vec<_>; 3] = Default::default();
    for chunk in corpus.chunks() {
        parts[which[chunk.episode_id.as_str()]].push(chunk.clone());
    }
    let [train, valid, test] = parts;
    let reg = corpus.registry();
    Ok([
        Corpus::with_registry(train, reg.clone())?,
        Corpus::with_registry(valid, reg.clone())?,
        Corpus::with_registry(test, reg.clone())?,
    ])
}
