use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multitask::TrainingExample;
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub hits_levels: Vec<usize>,
    pub num_candidates: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            hits_levels: vec![1, 5],
            num_candidates: 10,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_candidates < 2 {
            return Err(Error::Config("num_candidates must be >= 2".into()));
        }
        if let Some(&n) = self.hits_levels.iter().find(|&&n| n == 0 || n > self.num_candidates) {
            return Err(Error::Config(format!(
                "hits level {n} outside 1..={}",
                self.num_candidates
            )));
        }
        Ok(())
    }
}

/// Candidates for one evaluation example, as indices into the example
/// list: `candidates[gold_index] == example`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub example: usize,
    pub candidates: Vec<usize>,
    pub gold_index: usize,
}

impl CandidateSet {
    pub fn tokens<'a>(&self, examples: &'a [TrainingExample]) -> Vec<&'a [usize]> {
        self.candidates.iter().map(|&i| examples[i].response.as_slice()).collect()
    }
}

/// Gold plus distractors drawn uniformly without replacement from the other
/// examples' gold responses, skipping any whose text equals the gold; the
/// gold lands at a random position.
pub fn build_candidate_sets(examples: &[TrainingExample], cfg: &EvalConfig) -> Result<Vec<CandidateSet>> {
    cfg.validate()?;
    let k = cfg.num_candidates;
    if examples.len() < k {
        return Err(Error::invalid(format!(
            "split has {} responses, need at least {k}",
            examples.len()
        )));
    }
    let mut sets = Vec::with_capacity(examples.len());
    for (i, ex) in examples.iter().enumerate() {
        let pool: Vec<usize> = (0..examples.len())
            .filter(|&j| j != i && examples[j].response != ex.response)
            .collect();
        if pool.len() < k - 1 {
            return Err(Error::invalid(format!(
                "only {} distinct distractors for example {i}",
                pool.len()
            )));
        }
        let mut rng = rng_for(cfg.seed, &[0xca4d, i as u64]);
        let mut candidates: Vec<usize> = sample(&mut rng, pool.len(), k - 1).into_iter().map(|p| pool[p]).collect();
        let gold_index = rng.random_range(0..k);
        candidates.insert(gold_index, i);
        sets.push(CandidateSet {
            example: i,
            candidates,
            gold_index,
        });
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn examples(n: usize) -> Vec<TrainingExample> {
        (0..n)
            .map(|i| TrainingExample {
                context: vec![3],
                response: vec![3, 4 + i % 15],
                speaker: 0,
                chunk_index: i / 5,
                turn_index: i % 5,
                chunk_id: format!("c{}", i / 5),
            })
            .collect()
    }

    #[test]
    fn sets_are_well_formed() {
        let ex = examples(30);
        let sets = build_candidate_sets(&ex, &EvalConfig::default()).unwrap();
        assert_eq!(sets.len(), 30);
        for s in &sets {
            assert_eq!(s.candidates.len(), 10);
            assert_eq!(s.candidates.iter().filter(|&&c| c == s.example).count(), 1);
            assert_eq!(s.candidates[s.gold_index], s.example);
            let gold = &ex[s.example];
            for (pos, &c) in s.candidates.iter().enumerate() {
                if pos != s.gold_index {
                    assert_ne!(ex[c].response, gold.response);
                    assert!((ex[c].chunk_id.as_str(), ex[c].turn_index) != (gold.chunk_id.as_str(), gold.turn_index));
                }
            }
            let mut uniq = s.candidates.clone();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), 10);
        }
        assert_eq!(sets, build_candidate_sets(&ex, &EvalConfig::default()).unwrap());
        let other = EvalConfig {
            seed: 1,
            ..EvalConfig::default()
        };
        assert_ne!(sets, build_candidate_sets(&ex, &other).unwrap());
    }

    #[test]
    fn too_small_split() {
        assert!(build_candidate_sets(&examples(9), &EvalConfig::default()).is_err());
        let bad = EvalConfig {
            hits_levels: vec![11],
            ..EvalConfig::default()
        };
        assert!(build_candidate_sets(&examples(20), &bad).is_err());
    }
}
