mod common;

use std::fs;

use serde_json::Value;
use sha2::{Digest, Sha256};
use storyloom_core::corpus::{
    corpus_stats, generate_synthetic_corpus, load_corpus, save_corpus, save_relation_descriptions, split_corpus,
    SplitRatios, SynthParams,
};
use storyloom_core::encoder::build_vocab;

use common::fixture_path;

const FILES: [&str; 5] = ["corpus.jsonl", "relations.jsonl", "train.jsonl", "valid.jsonl", "test.jsonl"];

fn manifest() -> Value {
    serde_json::from_str(&fs::read_to_string(fixture_path("synthetic/manifest.json")).unwrap()).unwrap()
}

#[test]
fn files_match_the_manifest_checksums() {
    let m = manifest();
    for f in FILES {
        let bytes = fs::read(fixture_path(&format!("synthetic/{f}"))).unwrap();
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(m["sha256"][f].as_str().unwrap(), digest, "{f}");
    }
}

#[test]
fn stats_and_vocab_size_match_the_python_manifest() {
    let m = manifest();
    for f in ["corpus.jsonl", "train.jsonl", "valid.jsonl", "test.jsonl"] {
        let corpus = load_corpus(fixture_path(&format!("synthetic/{f}"))).unwrap();
        let s = corpus_stats(&corpus).unwrap();
        let want = &m["stats"][f];
        assert_eq!(want["chunks"].as_u64().unwrap() as usize, s.num_chunks, "{f}");
        assert_eq!(want["turns"].as_u64().unwrap() as usize, s.total_turns, "{f}");
        assert_eq!(want["characters"].as_u64().unwrap() as usize, corpus.registry().len(), "{f}");
        assert_eq!(want["avg_turns_per_chunk"].as_f64().unwrap(), s.avg_turns_per_chunk, "{f}");
        assert_eq!(
            want["avg_characters_per_chunk"].as_f64().unwrap(),
            s.avg_characters_per_chunk,
            "{f}"
        );
    }
    let train = load_corpus(fixture_path("synthetic/train.jsonl")).unwrap();
    let vocab = build_vocab(&train, 2).unwrap();
    assert_eq!(m["train_vocab_min_freq_2"].as_u64().unwrap() as usize, vocab.len());
}

#[test]
fn fixture_regenerates_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let synth = generate_synthetic_corpus(0, SynthParams::default()).unwrap();
    save_corpus(&synth.corpus, d.join("corpus.jsonl")).unwrap();
    save_relation_descriptions(&synth.descriptions, d.join("relations.jsonl")).unwrap();
    let parts = split_corpus(&synth.corpus, SplitRatios::new(0.7, 0.15, 0.15), 0).unwrap();
    for (name, part) in ["train", "valid", "test"].iter().zip(&parts) {
        save_corpus(part, d.join(format!("{name}.jsonl"))).unwrap();
    }
    for f in FILES {
        assert_eq!(
            fs::read(d.join(f)).unwrap(),
            fs::read(fixture_path(&format!("synthetic/{f}"))).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn training_split_has_the_advertised_shape() {
    let train = load_corpus(fixture_path("synthetic/train.jsonl")).unwrap();
    assert_eq!(train.len(), 100);
    assert_eq!(train.registry().len(), 6);
}
