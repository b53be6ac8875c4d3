//! Serialising relations, prior summaries and recent turns into one
//! context sequence, and turning a corpus into training examples.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::encoder::{truncate_recent, Vocab, CLS, SEP, UNK};
use crate::error::{Error, Result};
use crate::relations::{attach_relations, RelationTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextConfig {
    /// Dialogue turns of history preceding the target turn.
    pub n_last_turns: usize,
    /// Summaries of chunks strictly before the current one.
    pub n_history_chunks: usize,
    pub include_summary: bool,
    pub include_relations: bool,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            // two turns carry the planted reply structure; longer windows dilute
            // the pooled token at desk scale
            n_last_turns: 2,
            n_history_chunks: 2,
            include_summary: true,
            include_relations: true,
        }
    }
}

impl ContextConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_last_turns == 0 {
            return Err(Error::Config("n_last_turns must be >= 1".into()));
        }
        Ok(())
    }
}

/// One (context, gold response, gold next speaker) triple with provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub context: Vec<usize>,
    pub response: Vec<usize>,
    pub speaker: usize,
    pub chunk_index: usize,
    pub turn_index: usize,
    pub chunk_id: String,
}

fn marker(vocab: &Vocab, name: &str) -> usize {
    vocab
        .character_id(name)
        .and_then(|c| vocab.speaker_id(c))
        .unwrap_or(UNK)
}

/// Builds the context for the turn at (`chunk_index`, `turn_index`):
///
/// `[CLS]`, then one `SPKR_a label SPKR_b [SEP]` clause per relation triple
/// of the current chunk, then the summaries of up to `n_history_chunks`
/// preceding chunks (oldest first, each followed by `[SEP]`), then the last
/// `n_last_turns` turns before the target as `SPKR_x text`. Turns may reach
/// back into earlier chunks. Overlong contexts lose their oldest tokens.
pub fn assemble_context(
    corpus: &Corpus,
    chunk_index: usize,
    turn_index: usize,
    table: &RelationTable,
    cfg: &ContextConfig,
    vocab: &Vocab,
    max_seq_len: usize,
) -> Result<Vec<usize>> {
    let chunks = corpus.chunks();
    let chunk = chunks.get(chunk_index).ok_or(Error::IndexOutOfRange {
        index: chunk_index,
        len: chunks.len(),
    })?;
    if turn_index >= chunk.turns.len() {
        return Err(Error::IndexOutOfRange {
            index: turn_index,
            len: chunk.turns.len(),
        });
    }

    let mut history = Vec::with_capacity(cfg.n_last_turns);
    let (mut c, mut t) = (chunk_index, turn_index);
    while history.len() < cfg.n_last_turns {
        if t == 0 {
            if c == 0 {
                break;
            }
            c -= 1;
            t = chunks[c].turns.len();
            continue;
        }
        t -= 1;
        history.push(&chunks[c].turns[t]);
    }
    if history.is_empty() {
        return Err(Error::NoContext {
            chunk_index,
            turn_index,
        });
    }
    history.reverse();

    let mut ids = vec![CLS];
    if cfg.include_relations {
        for triple in attach_relations(chunk, table) {
            ids.push(marker(vocab, &triple.a));
            ids.push(vocab.label_id(triple.label));
            ids.push(marker(vocab, &triple.b));
            ids.push(SEP);
        }
    }
    if cfg.include_summary {
        let first = chunk_index.saturating_sub(cfg.n_history_chunks);
        for prior in &chunks[first..chunk_index] {
            ids.extend(vocab.encode_text(&prior.summary));
            ids.push(SEP);
        }
    }
    for turn in history {
        ids.push(marker(vocab, &turn.speaker));
        ids.extend(vocab.encode_text(&turn.text));
    }
    Ok(truncate_recent(&ids, max_seq_len))
}

/// `[CLS]` + utterance tokens, cut to `max_seq_len`.
pub fn encode_response(text: &str, vocab: &Vocab, max_seq_len: usize) -> Vec<usize> {
    let mut ids = vec![CLS];
    ids.extend(vocab.encode_text(text));
    ids.truncate(max_seq_len.max(1));
    ids
}

/// Every turn that has at least one turn of history becomes an example.
pub fn build_examples(
    corpus: &Corpus,
    table: &RelationTable,
    cfg: &ContextConfig,
    vocab: &Vocab,
    max_seq_len: usize,
) -> Result<Vec<TrainingExample>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for (ci, chunk) in corpus.chunks().iter().enumerate() {
        for (ti, turn) in chunk.turns.iter().enumerate() {
            if ci == 0 && ti == 0 {
                continue;
            }
            let speaker = vocab.character_id(&turn.speaker).ok_or_else(|| {
                Error::invalid(format!("speaker `{}` is unknown to the vocabulary", turn.speaker))
            })?;
            out.push(TrainingExample {
                context: assemble_context(corpus, ci, ti, table, cfg, vocab, max_seq_len)?,
                response: encode_response(&turn.text, vocab, max_seq_len),
                speaker,
                chunk_index: ci,
                turn_index: ti,
                chunk_id: chunk.chunk_id.clone(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DialogueChunk, Turn};
    use crate::encoder::build_vocab;
    use crate::relations::RelationLabel;

    fn corpus() -> Corpus {
        let chunk = |i: usize| {
            DialogueChunk::new(
                format!("c{i}"),
                "e0",
                format!("summary{i} alpha"),
                vec![
                    Turn::dialogue("A", format!("a{i} one")),
                    Turn::dialogue("B", format!("b{i} two")),
                    Turn::dialogue("C", format!("c{i} three")),
                ],
            )
        };
        Corpus::new((0..6).map(chunk).collect()).unwrap()
    }

    fn cfg(turns: usize, hist: usize, summary: bool, rel: bool) -> ContextConfig {
        ContextConfig {
            n_last_turns: turns,
            n_history_chunks: hist,
            include_summary: summary,
            include_relations: rel,
        }
    }

    #[test]
    fn bare_context_is_last_turns() {
        let c = corpus();
        let v = build_vocab(&c, 1).unwrap();
        let ids = assemble_context(&c, 2, 2, &RelationTable::default(), &cfg(2, 0, false, false), &v, 256).unwrap();
        assert_eq!(v.render(&ids), "[CLS] A a2 one B b2 two");
        // reaching back into the previous chunk
        let ids = assemble_context(&c, 2, 0, &RelationTable::default(), &cfg(2, 3, false, false), &v, 256).unwrap();
        assert_eq!(v.render(&ids), "[CLS] B b1 two C c1 three");
    }

    #[test]
    fn summaries_are_strictly_prior() {
        let c = corpus();
        let v = build_vocab(&c, 1).unwrap();
        let ids = assemble_context(&c, 5, 1, &RelationTable::default(), &cfg(1, 2, true, false), &v, 256).unwrap();
        let text = v.render(&ids);
        assert_eq!(text, "[CLS] summary3 alpha [SEP] summary4 alpha [SEP] A a5 one");
        assert!(!text.contains("summary5"));
    }

    #[test]
    fn relation_clauses() {
        let c = corpus();
        let v = build_vocab(&c, 1).unwrap();
        let mut table = RelationTable::default();
        table.insert("B", "A", RelationLabel::Positive);
        let ids = assemble_context(&c, 1, 1, &table, &cfg(1, 0, false, true), &v, 256).unwrap();
        assert_eq!(
            v.render(&ids),
            "[CLS] A positive B [SEP] A neutral C [SEP] B neutral C [SEP] A a1 one"
        );
    }

    #[test]
    fn truncation_drops_oldest() {
        let c = corpus();
        let v = build_vocab(&c, 1).unwrap();
        let ids = assemble_context(&c, 5, 2, &RelationTable::default(), &cfg(8, 3, true, true), &v, 5).unwrap();
        assert_eq!(v.render(&ids), "[CLS] one B b5 two");
    }

    #[test]
    fn first_turn_has_no_context() {
        let c = corpus();
        let v = build_vocab(&c, 1).unwrap();
        let err = assemble_context(&c, 0, 0, &RelationTable::default(), &ContextConfig::default(), &v, 64);
        assert!(matches!(err, Err(Error::NoContext { .. })));
        let ex = build_examples(&c, &RelationTable::default(), &ContextConfig::default(), &v, 64).unwrap();
        assert_eq!(ex.len(), 6 * 3 - 1);
        assert_eq!(ex[0].speaker, v.character_id("B").unwrap());
        assert_eq!(v.render(&ex[0].response), "[CLS] b0 two");
    }
}
