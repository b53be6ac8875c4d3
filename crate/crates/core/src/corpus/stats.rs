use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub avg_turns_per_chunk: f64,
    pub avg_characters_per_chunk: f64,
    pub num_chunks: usize,
    pub total_turns: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n = corpus.len();
    let total_turns = corpus.total_turns();
    let total_chars: usize = corpus
        .chunks()
        .iter()
        .map(|c| c.characters_present.len())
        .sum();
    Ok(CorpusStats {
        avg_turns_per_chunk: total_turns as f64 / n as f64,
        avg_characters_per_chunk: total_chars as f64 / n as f64,
        num_chunks: n,
        total_turns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DialogueChunk, Turn};

    #[test]
    fn single_chunk_mean() {
        let turns = ["A", "B", "A", "B", "A"]
            .iter()
            .map(|s| Turn::dialogue(*s, "words"))
            .collect();
        let corpus = Corpus::new(vec![DialogueChunk::new("c", "e", "s", turns)]).unwrap();
        let stats = corpus_stats(&corpus).unwrap();
        assert_eq!(stats.avg_turns_per_chunk, 5.0);
        assert_eq!(stats.avg_characters_per_chunk, 2.0);
        assert_eq!(stats.num_chunks, 1);
    }

    #[test]
    fn empty_corpus_errors() {
        let corpus = Corpus::new(vec![]).unwrap();
        assert!(matches!(corpus_stats(&corpus), Err(Error::EmptyCorpus)));
    }
}
