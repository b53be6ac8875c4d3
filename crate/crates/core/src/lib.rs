//! Character-driven story continuation laboratory.
//!
//! The crate is organised around the pipeline it implements:
//!
//! - [`corpus`]: the dialogue data model, JSONL loading, statistics, episode
//!   level splits and a seeded synthetic corpus generator.
//! - [`relations`]: TF-IDF vectorisation of free-text relationship
//!   descriptions, k-means clustering, lexicon sentiment scoring and the
//!   resulting pairwise relation table attached to every chunk.
//! - [`encoder`]: a small post-norm transformer encoder with an explicit
//!   backward pass and a finite-difference gradient checker.
//! - [`multitask`]: context assembly, the ranking and next-speaker losses,
//!   the Adamax training loop and checkpoints.
//! - [`harness`]: candidate sets, Hits@N and weighted F1, the ablation grids
//!   and report emission.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod multitask;
pub mod relations;
pub mod rng;

pub use error::{Error, Result};
