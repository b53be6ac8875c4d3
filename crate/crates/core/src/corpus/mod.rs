//! Dialogue data model: turns, chunks, corpora and relation descriptions.

mod io;
mod split;
mod stats;
mod synth;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_corpus, load_relation_descriptions, parse_corpus, parse_relation_descriptions,
    save_corpus, save_relation_descriptions, write_corpus, write_relation_descriptions,
};
pub use split::{split_corpus, SplitRatios};
pub use stats::{corpus_stats, CorpusStats};
pub use synth::{generate_synthetic_corpus, SynthParams, SyntheticCorpus};

/// How a turn is voiced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TurnKind {
    Dialogue,
    FirstPersonNarration,
    SecondPersonNarration,
}

impl TurnKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TurnKind::Dialogue => "dialogue",
            TurnKind::FirstPersonNarration => "first-person-narration",
            TurnKind::SecondPersonNarration => "second-person-narration",
        }
    }

    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "dialogue" => Some(TurnKind::Dialogue),
            "first-person-narration" => Some(TurnKind::FirstPersonNarration),
            "second-person-narration" => Some(TurnKind::SecondPersonNarration),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: String,
    pub text: String,
    pub kind: TurnKind,
}

impl Turn {
    pub fn new(speaker: impl Into<String>, text: impl Into<String>, kind: TurnKind) -> Self {
        Turn {
            speaker: speaker.into(),
            text: text.into(),
            kind,
        }
    }

    pub fn dialogue(speaker: impl Into<String>, text: impl Into<String>) -> Self {
        Turn::new(speaker, text, TurnKind::Dialogue)
    }
}

/// A summarised span of turns ending at a sub-plot boundary.
///
/// `characters_present` is exactly the set of distinct speakers; the narrator
/// ("DM") counts as a character like any other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueChunk {
    pub chunk_id: String,
    pub episode_id: String,
    pub summary: String,
    pub turns: Vec<Turn>,
    pub characters_present: BTreeSet<String>,
}

impl DialogueChunk {
    /// Builds a chunk, deriving `characters_present` from the speakers.
    pub fn new(
        chunk_id: impl Into<String>,
        episode_id: impl Into<String>,
        summary: impl Into<String>,
        turns: Vec<Turn>,
    ) -> Self {
        let characters_present = turns.iter().map(|t| t.speaker.clone()).collect();
        DialogueChunk {
            chunk_id: chunk_id.into(),
            episode_id: episode_id.into(),
            summary: summary.into(),
            turns,
            characters_present,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.turns.is_empty() {
            return Err(Error::EmptyChunk(self.chunk_id.clone()));
        }
        let invalid = |message: String| Error::InvalidChunk {
            chunk_id: self.chunk_id.clone(),
            message,
        };
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.speaker.trim().is_empty() {
                return Err(invalid(format!("turn {i} has an empty speaker")));
            }
            if turn.text.trim().is_empty() {
                return Err(invalid(format!("turn {i} has empty text")));
            }
        }
        let speakers: BTreeSet<&str> = self.turns.iter().map(|t| t.speaker.as_str()).collect();
        let present: BTreeSet<&str> = self.characters_present.iter().map(String::as_str).collect();
        if speakers != present {
            return Err(invalid(format!(
                "characters_present {present:?} does not match speakers {speakers:?}"
            )));
        }
        Ok(())
    }
}

/// Dense 0-based character ids in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CharacterRegistry {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl CharacterRegistry {
    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut reg = CharacterRegistry::default();
        for name in names {
            let name = name.into();
            if reg.index.contains_key(&name) {
                return Err(Error::invalid(format!("duplicate character `{name}`")));
            }
            reg.insert(name);
        }
        Ok(reg)
    }

    fn insert(&mut self, name: String) -> usize {
        if let Some(&id) = self.index.get(&name) {
            return id;
        }
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// An ordered, validated collection of chunks plus its character registry.
///
/// Immutable once built; split corpora share their parent's registry so
/// speaker ids stay aligned across train/valid/test.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    chunks: Vec<DialogueChunk>,
    registry: CharacterRegistry,
}

impl Corpus {
    /// Validates the chunks and builds the registry in first-appearance order.
    pub fn new(chunks: Vec<DialogueChunk>) -> Result<Self> {
        let mut registry = CharacterRegistry::default();
        for chunk in &chunks {
            for turn in &chunk.turns {
                registry.insert(turn.speaker.clone());
            }
        }
        Corpus::with_registry(chunks, registry)
    }

    /// Validates the chunks against an existing registry.
    pub fn with_registry(chunks: Vec<DialogueChunk>, registry: CharacterRegistry) -> Result<Self> {
        let mut seen = HashSet::new();
        for chunk in &chunks {
            chunk.validate()?;
            if !seen.insert(chunk.chunk_id.as_str()) {
                return Err(Error::DuplicateChunk(chunk.chunk_id.clone()));
            }
            for turn in &chunk.turns {
                if registry.id(&turn.speaker).is_none() {
                    return Err(Error::InvalidChunk {
                        chunk_id: chunk.chunk_id.clone(),
                        message: format!("speaker `{}` missing from registry", turn.speaker),
                    });
                }
            }
        }
        Ok(Corpus { chunks, registry })
    }

    pub fn chunks(&self) -> &[DialogueChunk] {
        &self.chunks
    }

    pub fn registry(&self) -> &CharacterRegistry {
        &self.registry
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn total_turns(&self) -> usize {
        self.chunks.iter().map(|c| c.turns.len()).sum()
    }

    /// Episode ids in first-appearance order.
    pub fn episodes(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.chunks
            .iter()
            .map(|c| c.episode_id.as_str())
            .filter(|e| seen.insert(*e))
            .collect()
    }
}

/// Free-text description of how two characters relate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDescription {
    pub pair: [String; 2],
    pub text: String,
}

impl RelationDescription {
    pub fn new(a: impl Into<String>, b: impl Into<String>, text: impl Into<String>) -> Self {
        RelationDescription {
            pair: [a.into(), b.into()],
            text: text.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pair[0] == self.pair[1] {
            return Err(Error::invalid(format!(
                "relation description pairs `{}` with itself",
                self.pair[0]
            )));
        }
        if self.text.trim().is_empty() {
            return Err(Error::invalid(format!(
                "relation description for ({}, {}) is empty",
                self.pair[0], self.pair[1]
            )));
        }
        Ok(())
    }

    /// The pair in lexicographic order.
    pub fn canonical_pair(&self) -> (&str, &str) {
        let (a, b) = (self.pair[0].as_str(), self.pair[1].as_str());
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(id: &str, ep: &str, speakers: &[&str]) -> DialogueChunk {
        let turns = speakers
            .iter()
            .map(|s| Turn::dialogue(*s, format!("{s} says hi")))
            .collect();
        DialogueChunk::new(id, ep, "summary", turns)
    }

    #[test]
    fn registry_in_first_appearance_order() {
        let corpus = Corpus::new(vec![
            chunk("c0", "e0", &["Vexahlia", "Scanlan"]),
            chunk("c1", "e0", &["DM", "Scanlan", "Keyleth"]),
        ])
        .unwrap();
        assert_eq!(
            corpus.registry().names(),
            &["Vexahlia", "Scanlan", "DM", "Keyleth"]
        );
        assert_eq!(corpus.registry().id("DM"), Some(2));
    }

    #[test]
    fn duplicate_chunk_rejected() {
        let err = Corpus::new(vec![chunk("c0", "e0", &["A"]), chunk("c0", "e0", &["B"])]);
        assert!(matches!(err, Err(Error::DuplicateChunk(id)) if id == "c0"));
    }

    #[test]
    fn characters_present_must_match_speakers() {
        let mut c = chunk("c0", "e0", &["A", "B"]);
        c.characters_present.insert("C".into());
        assert!(matches!(c.validate(), Err(Error::InvalidChunk { .. })));
    }

    #[test]
    fn blank_turn_text_rejected() {
        let c = DialogueChunk::new("c0", "e0", "", vec![Turn::dialogue("A", "   ")]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn relation_description_invariants() {
        assert!(RelationDescription::new("A", "A", "x").validate().is_err());
        assert!(RelationDescription::new("A", "B", " ").validate().is_err());
        let d = RelationDescription::new("Scanlan", "Keyleth", "friends");
        assert_eq!(d.canonical_pair(), ("Keyleth", "Scanlan"));
    }
}
