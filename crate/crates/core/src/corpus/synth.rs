//! Seeded synthetic corpora with planted, learnable structure.
//!
//! Every character owns two slices of a pseudo-word vocabulary: words it
//! uses when speaking and words others use to address it. A turn mixes
//! three words of the speaker's own slice, two address words of the
//! character it speaks to, a topic word of the current chunk and, after
//! the first turn of a chunk, one word echoed from the previous turn. The
//! addressee usually speaks next and usually answers the previous speaker,
//! so both the next speaker and the gold response are recoverable from the
//! most recent turn. Addressees are drawn with a bias
//! toward positively related characters, and consecutive chunks share a topic
//! word, which gives relation labels and chunk summaries a (weak) signal.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, DialogueChunk, RelationDescription, Turn, TurnKind};
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthParams {
    pub num_episodes: usize,
    pub chunks_per_episode: usize,
    pub characters: usize,
    pub vocab_size: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            num_episodes: 14,
            chunks_per_episode: 10,
            characters: 6,
            vocab_size: 168,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub descriptions: Vec<RelationDescription>,
}

const NAMES: &[&str] = &[
    "DM", "Scanlan", "Vexahlia", "Keyleth", "Grog", "Percy", "Vaxildan", "Pike", "Trinket",
    "Tiberius", "Taryon", "Kima", "Allura", "Zahra", "Kashaw", "Lillith",
];

const POSITIVE: &[&str] = &[
    "{a} and {b} are close friends who trust each other completely.",
    "{a} has a fond and warm bond with {b}, and the two laugh together often.",
    "{b} admires {a}, and their friendship is loyal and kind.",
    "{a} and {b} share a happy, caring rapport and gladly help each other.",
];

const NEGATIVE: &[&str] = &[
    "{a} and {b} argue constantly and distrust each other.",
    "{a} once betrayed {b}, and the bitter hatred between them remains.",
    "{b} resents {a} after a cruel fight that left them both hurt and angry.",
    "{a} threatens {b} often; their rivalry is hostile and violent.",
];

const NEUTRAL: &[&str] = &[
    "{a} and {b} rarely interact and mostly travel in the same group.",
    "{b} knows {a} mainly through shared business with the party.",
    "{a} and {b} have an ordinary working arrangement on expeditions.",
    "{a} met {b} during a journey, and the two simply coexist.",
];

const CONSONANTS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "th", "sh",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const TURNS_PER_CHUNK: std::ops::RangeInclusive<usize> = 14..=20;
/// Chance that a turn is addressed back to the previous speaker.
const REPLY_PROB: f64 = 0.85;
/// Chance that the character addressed by a turn speaks next.
const NEXT_IS_ADDRESSEE_PROB: f64 = 0.9;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Bond {
    Positive,
    Negative,
    Neutral,
}

fn character_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match NAMES.get(i) {
            Some(name) => name.to_string(),
            None => format!("Hero{i}"),
        })
        .collect()
}

fn pseudo_words(rng: &mut ChaCha8Rng, count: usize, reserved: &HashSet<String>) -> Vec<String> {
    let mut seen: HashSet<String> = HashSet::new();
    let mut words = Vec::with_capacity(count);
    while words.len() < count {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(CONSONANTS.choose(rng).unwrap());
            w.push_str(VOWELS.choose(rng).unwrap());
        }
        if !reserved.contains(&w) && seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn render(template: &str, a: &str, b: &str) -> String {
    template.replace("{a}", a).replace("{b}", b)
}

pub fn generate_synthetic_corpus(seed: u64, params: SynthParams) -> Result<SyntheticCorpus> {
    let SynthParams {
        num_episodes,
        chunks_per_episode,
        characters,
        vocab_size,
    } = params;
    if num_episodes == 0 || chunks_per_episode == 0 || vocab_size == 0 {
        return Err(Error::invalid("synthetic corpus params must be >= 1"));
    }
    if characters < 2 {
        return Err(Error::invalid("synthetic corpus needs at least 2 characters"));
    }
    let mut rng = rng_for(seed, &[0x5717]);
    let names = character_names(characters);
    let reserved: HashSet<String> = names.iter().map(|n| n.to_lowercase()).collect();
    let words = pseudo_words(&mut rng, vocab_size, &reserved);

    // half the vocabulary for character slices, half for topics
    let per_char = (vocab_size / (4 * characters)).max(1);
    let slice = |s: usize| -> Vec<&str> {
        (0..per_char)
            .map(|j| words[(s * per_char + j) % vocab_size].as_str())
            .collect()
    };
    let slices: Vec<Vec<&str>> = (0..characters).map(slice).collect();
    let address: Vec<Vec<&str>> = (characters..2 * characters).map(slice).collect();
    let used = 2 * characters * per_char;
    let topic_pool: Vec<&str> = if used < vocab_size {
        words[used..].iter().map(String::as_str).collect()
    } else {
        words.iter().map(String::as_str).collect()
    };

    let mut bonds: BTreeMap<(usize, usize), Bond> = BTreeMap::new();
    let mut descriptions = Vec::new();
    for a in 0..characters {
        for b in a + 1..characters {
            let roll: f64 = rng.random();
            let (bond, pool) = if roll < 0.4 {
                (Bond::Positive, POSITIVE)
            } else if roll < 0.7 {
                (Bond::Negative, NEGATIVE)
            } else {
                (Bond::Neutral, NEUTRAL)
            };
            bonds.insert((a, b), bond);
            let template = pool.choose(&mut rng).unwrap();
            descriptions.push(RelationDescription::new(
                names[a].clone(),
                names[b].clone(),
                render(template, &names[a], &names[b]),
            ));
        }
    }
    let bond = |x: usize, y: usize| bonds[&(x.min(y), x.max(y))];

    let lo = characters.min(3);
    let hi = characters.min(4);
    let mut topic: [&str; 2] = [
        topic_pool.choose(&mut rng).unwrap(),
        topic_pool.choose(&mut rng).unwrap(),
    ];
    let mut chunks = Vec::with_capacity(num_episodes * chunks_per_episode);
    for e in 0..num_episodes {
        for k in 0..chunks_per_episode {
            // one topic word carries over from the previous chunk
            topic = [topic[1], topic_pool.choose(&mut rng).unwrap()];
            let m = rng.random_range(lo..=hi);
            let mut cast: Vec<usize> = (0..characters).collect();
            cast.shuffle(&mut rng);
            cast.truncate(m);
            cast.sort_unstable();

            let num_turns = rng.random_range(TURNS_PER_CHUNK);
            let mut speaker = *cast.choose(&mut rng).unwrap();
            let mut previous: Option<usize> = None;
            let mut turns: Vec<Turn> = Vec::with_capacity(num_turns);
            for _ in 0..num_turns {
                let others: Vec<usize> = cast.iter().copied().filter(|&c| c != speaker).collect();
                // mostly answer whoever spoke last, else pick by bond
                let addressee = match previous {
                    Some(p) if p != speaker && rng.random_bool(REPLY_PROB) => p,
                    _ => *others
                        .choose_weighted(&mut rng, |&c| match bond(speaker, c) {
                            Bond::Positive => 4.0,
                            Bond::Neutral => 2.0,
                            Bond::Negative => 1.0,
                        })
                        .unwrap(),
                };
                let mut text: Vec<&str> = Vec::with_capacity(7);
                for _ in 0..3 {
                    text.push(slices[speaker].choose(&mut rng).unwrap());
                }
                for _ in 0..2 {
                    text.push(address[addressee].choose(&mut rng).unwrap());
                }
                text.push(topic.choose(&mut rng).unwrap());
                // echo a word of the turn being answered
                let echo = turns.last().map(|t| {
                    let ws: Vec<&str> = t.text.split(' ').collect();
                    ws[rng.random_range(0..ws.len())].to_string()
                });
                let mut text: Vec<String> = text.iter().map(|w| w.to_string()).collect();
                text.extend(echo);
                text.shuffle(&mut rng);
                let kind = if names[speaker] == "DM" {
                    TurnKind::SecondPersonNarration
                } else if rng.random_bool(0.15) {
                    TurnKind::FirstPersonNarration
                } else {
                    TurnKind::Dialogue
                };
                turns.push(Turn::new(names[speaker].clone(), text.join(" "), kind));

                previous = Some(speaker);
                speaker = if rng.random_bool(NEXT_IS_ADDRESSEE_PROB) {
                    addressee
                } else {
                    *others.choose(&mut rng).unwrap()
                };
            }

            let present: BTreeSet<&str> = turns.iter().map(|t| t.speaker.as_str()).collect();
            let listed: Vec<&str> = present.iter().copied().collect();
            let summary = format!(
                "{} deal with the {} and the {}.",
                listed.join(" and "),
                topic[0],
                topic[1]
            );
            chunks.push(DialogueChunk::new(
                format!("ep{e:03}-c{k:03}"),
                format!("ep{e:03}"),
                summary,
                turns,
            ));
        }
    }
    let corpus = Corpus::new(chunks)?;
    Ok(SyntheticCorpus {
        corpus,
        descriptions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_corpus;

    fn params(chars: usize) -> SynthParams {
        SynthParams {
            num_episodes: 3,
            chunks_per_episode: 2,
            characters: chars,
            vocab_size: 40,
        }
    }

    #[test]
    fn one_description_per_pair() {
        let s = generate_synthetic_corpus(1, params(4)).unwrap();
        assert_eq!(s.descriptions.len(), 6);
        let pairs: HashSet<(String, String)> = s
            .descriptions
            .iter()
            .map(|d| {
                let (a, b) = d.canonical_pair();
                (a.to_string(), b.to_string())
            })
            .collect();
        assert_eq!(pairs.len(), 6);
    }

    #[test]
    fn chunk_count_is_product() {
        let p = SynthParams {
            num_episodes: 20,
            chunks_per_episode: 5,
            characters: 6,
            vocab_size: 100,
        };
        let s = generate_synthetic_corpus(3, p).unwrap();
        assert_eq!(s.corpus.len(), 100);
        assert_eq!(s.corpus.episodes().len(), 20);
    }

    #[test]
    fn same_seed_same_bytes() {
        let dump = |seed| {
            let s = generate_synthetic_corpus(seed, params(5)).unwrap();
            let mut buf = Vec::new();
            write_corpus(&s.corpus, &mut buf).unwrap();
            buf.extend(format!("{:?}", s.descriptions).bytes());
            buf
        };
        assert_eq!(dump(1), dump(1));
        let outputs: HashSet<Vec<u8>> = (0..5).map(dump).collect();
        assert_eq!(outputs.len(), 5);
    }

    #[test]
    fn two_characters_and_tiny_vocab() {
        let p = SynthParams {
            num_episodes: 1,
            chunks_per_episode: 1,
            characters: 2,
            vocab_size: 1,
        };
        let s = generate_synthetic_corpus(0, p).unwrap();
        assert_eq!(s.corpus.len(), 1);
        assert_eq!(s.descriptions.len(), 1);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(generate_synthetic_corpus(0, params(1)).is_err());
        let mut p = params(3);
        p.num_episodes = 0;
        assert!(generate_synthetic_corpus(0, p).is_err());
    }
}
