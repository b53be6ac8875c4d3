#![allow(dead_code)]

use std::path::PathBuf;

use storyloom_core::corpus::{load_corpus, load_relation_descriptions, Corpus, RelationDescription};
use storyloom_core::multitask::RunConfig;
use storyloom_core::relations::{mine_relations, RelationTable, SentimentLexicon, DEFAULT_CLUSTERS};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// The committed synthetic corpus, its splits and the relation table mined
/// from its descriptions with seed 0.
pub struct Synthetic {
    pub train: Corpus,
    pub valid: Corpus,
    pub test: Corpus,
    pub descriptions: Vec<RelationDescription>,
    pub table: RelationTable,
}

pub fn synthetic() -> Synthetic {
    let load = |f: &str| load_corpus(fixture_path(&format!("synthetic/{f}"))).unwrap();
    let descriptions = load_relation_descriptions(fixture_path("synthetic/relations.jsonl")).unwrap();
    let table = mine_relations(&descriptions, &SentimentLexicon::bundled(), DEFAULT_CLUSTERS, 0)
        .unwrap()
        .table;
    Synthetic {
        train: load("train.jsonl"),
        valid: load("valid.jsonl"),
        test: load("test.jsonl"),
        descriptions,
        table,
    }
}

/// A model small enough to train in seconds; for plumbing checks only.
pub fn tiny_config(epochs: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.encoder.num_layers = 1;
    cfg.encoder.num_heads = 2;
    cfg.encoder.embed_dim = 16;
    cfg.encoder.ffn_dim = 32;
    cfg.encoder.max_seq_len = 64;
    cfg.training.epochs = epochs;
    cfg
}
