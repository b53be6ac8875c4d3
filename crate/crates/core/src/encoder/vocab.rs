//! Whitespace-level vocabulary with reserved specials and speaker markers.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::relations::{tokenize, RelationLabel};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const SEP: usize = 2;
/// Leading token whose final hidden state is the pooled representation.
pub const CLS: usize = 3;

const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[SEP]", "[CLS]"];
const HEADER: &str = "#storyloom-vocab";

/// Layout: specials, relation label words, one marker per character (in
/// registry order), then corpus tokens by descending frequency with
/// lexicographic tie-break.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    characters: Vec<String>,
}

pub fn speaker_marker(name: &str) -> String {
    format!("[SPKR:{name}]")
}

impl Vocab {
    fn from_parts(characters: Vec<String>, words: Vec<String>) -> Result<Self> {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(RelationLabel::ALL.iter().map(|l| l.as_str().to_string()));
        tokens.extend(characters.iter().map(|c| speaker_marker(c)));
        tokens.extend(words);
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Vocab {
            tokens,
            index,
            characters,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_characters(&self) -> usize {
        self.characters.len()
    }

    pub fn characters(&self) -> &[String] {
        &self.characters
    }

    /// Classifier index of a character known to this vocabulary.
    pub fn character_id(&self, name: &str) -> Option<usize> {
        self.characters.iter().position(|c| c == name)
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn label_id(&self, label: RelationLabel) -> usize {
        SPECIALS.len()
            + RelationLabel::ALL
                .iter()
                .position(|l| *l == label)
                .expect("label listed")
    }

    /// Marker token id for character `character_id`.
    pub fn speaker_id(&self, character_id: usize) -> Option<usize> {
        (character_id < self.characters.len())
            .then(|| SPECIALS.len() + RelationLabel::ALL.len() + character_id)
    }

    pub fn speaker_of_marker(&self, id: usize) -> Option<usize> {
        let base = SPECIALS.len() + RelationLabel::ALL.len();
        (base..base + self.characters.len())
            .contains(&id)
            .then(|| id - base)
    }

    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }

    /// Human-readable rendering; speaker markers print as the bare name.
    pub fn render(&self, ids: &[usize]) -> String {
        ids.iter()
            .map(|&id| match self.speaker_of_marker(id) {
                Some(c) => self.characters[c].clone(),
                None => self.token(id).unwrap_or("[?]").to_string(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\t{}\n", self.characters.len());
        for c in &self.characters {
            out.push_str(c);
            out.push('\n');
        }
        let skip = SPECIALS.len() + RelationLabel::ALL.len() + self.characters.len();
        for t in &self.tokens[skip..] {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty vocabulary file"))?;
        let count: usize = header
            .strip_prefix(HEADER)
            .and_then(|rest| rest.trim().parse().ok())
            .ok_or_else(|| Error::invalid("bad vocabulary header"))?;
        let characters: Vec<String> = lines.by_ref().take(count).map(str::to_string).collect();
        if characters.len() != count {
            return Err(Error::invalid("truncated vocabulary file"));
        }
        let words = lines.map(str::to_string).collect();
        Vocab::from_parts(characters, words)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocab::from_text(&text)
    }
}

/// Counts tokens of every turn and summary; keeps those seen at least
/// `min_freq` times.
pub fn build_vocab(corpus: &Corpus, min_freq: usize) -> Result<Vocab> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if min_freq == 0 {
        return Err(Error::invalid("min_freq must be >= 1"));
    }
    let characters: Vec<String> = corpus.registry().names().to_vec();
    let mut reserved: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    reserved.extend(RelationLabel::ALL.iter().map(|l| l.as_str().to_string()));
    reserved.extend(characters.iter().map(|c| speaker_marker(c)));

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for chunk in corpus.chunks() {
        let texts = chunk
            .turns
            .iter()
            .map(|t| t.text.as_str())
            .chain(std::iter::once(chunk.summary.as_str()));
        for text in texts {
            for tok in tokenize(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
    }
    let mut words: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_freq && !reserved.contains(t))
        .collect();
    // BTreeMap order is lexicographic; the stable sort keeps it within ties
    words.sort_by_key(|w| std::cmp::Reverse(w.1));
    Vocab::from_parts(characters, words.into_iter().map(|(t, _)| t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DialogueChunk, Turn};

    fn corpus() -> Corpus {
        Corpus::new(vec![DialogueChunk::new(
            "c",
            "e",
            "Bundle up",
            vec![
                Turn::dialogue("Vexahlia", "bundle up bundle"),
                Turn::dialogue("Scanlan", "okay positive zeta"),
            ],
        )])
        .unwrap()
    }

    #[test]
    fn layout_and_ordering() {
        let v = build_vocab(&corpus(), 1).unwrap();
        assert_eq!(v.token(PAD), Some("[PAD]"));
        assert_eq!(v.token(CLS), Some("[CLS]"));
        assert_eq!(v.token(v.label_id(RelationLabel::Neutral)), Some("neutral"));
        assert_eq!(v.token(v.speaker_id(1).unwrap()), Some("[SPKR:Scanlan]"));
        assert_eq!(v.speaker_of_marker(v.speaker_id(0).unwrap()), Some(0));
        // bundle x3, up x2, then okay/zeta (x1) lexicographically
        let words: Vec<&str> = (9..v.len()).map(|i| v.token(i).unwrap()).collect();
        assert_eq!(words, ["bundle", "up", "okay", "zeta"]);
        assert_eq!(v.id("positive"), v.label_id(RelationLabel::Positive));
    }

    #[test]
    fn min_freq_maps_rare_tokens_to_unk() {
        let v = build_vocab(&corpus(), 2).unwrap();
        assert_eq!(v.id("okay"), UNK);
        assert_ne!(v.id("bundle"), UNK);
        assert_eq!(v.encode_text("Okay, bundle!"), vec![UNK, v.id("bundle")]);
    }

    #[test]
    fn text_roundtrip_and_render() {
        let v = build_vocab(&corpus(), 1).unwrap();
        assert_eq!(Vocab::from_text(&v.to_text()).unwrap(), v);
        let ids = [v.speaker_id(1).unwrap(), v.label_id(RelationLabel::Neutral), v.speaker_id(0).unwrap()];
        assert_eq!(v.render(&ids), "Scanlan neutral Vexahlia");
    }
}
