//! A small BERT-shaped text encoder with a hand-written backward pass.

mod config;
mod model;
mod params;
mod vocab;

pub use config::EncoderConfig;
pub use model::{gelu, gelu_grad, truncate_recent, Encoder, ForwardTrace, LayerTrace};
pub use params::{EncoderParams, LayerParams};
pub use vocab::{build_vocab, speaker_marker, Vocab, CLS, PAD, SEP, UNK};
