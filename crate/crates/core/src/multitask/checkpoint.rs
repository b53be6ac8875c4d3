//! Binary model container: magic, version, a JSON header describing the
//! configs, vocabulary and tensor shapes, then every tensor as
//! little-endian f64 in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::context::ContextConfig;
use super::model::BiEncoder;
use super::train::TrainedModel;
use crate::encoder::{EncoderConfig, Vocab};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"STLMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    encoder: EncoderConfig,
    context: ContextConfig,
    num_characters: usize,
    vocab: String,
    tensors: Vec<(String, Vec<usize>)>,
}

pub fn checkpoint_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    checkpoint_bytes_versioned(model, CHECKPOINT_VERSION)
}

pub(crate) fn checkpoint_bytes_versioned(model: &TrainedModel, version: u32) -> Result<Vec<u8>> {
    let tensors = model.model.tensors();
    let header = Header {
        encoder: *model.encoder_config(),
        context: model.context_config,
        num_characters: model.model.head.num_characters(),
        vocab: model.vocab.to_text(),
        tensors: tensors.iter().map(|(n, s, _)| (n.clone(), s.clone())).collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, _, v) in &tensors {
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::CorruptCheckpoint("file is truncated".into()));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

pub fn checkpoint_from_bytes(mut bytes: &[u8]) -> Result<TrainedModel> {
    let b = &mut bytes;
    if take(b, MAGIC.len())? != MAGIC {
        return Err(Error::CorruptCheckpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(take(b, 4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let len = u64::from_le_bytes(take(b, 8)?.try_into().expect("8 bytes")) as usize;
    let header: Header =
        serde_json::from_slice(take(b, len)?).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let vocab = Vocab::from_text(&header.vocab)?;
    let mut model = BiEncoder::new(header.encoder, vocab.len(), header.num_characters, 0)?;
    let expected: Vec<(String, Vec<usize>)> = model
        .tensors()
        .into_iter()
        .map(|(n, s, _)| (n, s))
        .collect();
    if expected != header.tensors {
        return Err(Error::CorruptCheckpoint("tensor layout does not match the config".into()));
    }
    for t in model.tensors_mut() {
        let raw = take(b, t.len() * 8)?;
        for (x, chunk) in t.iter_mut().zip(raw.chunks_exact(8)) {
            *x = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
    }
    if !b.is_empty() {
        return Err(Error::CorruptCheckpoint("trailing bytes".into()));
    }
    if !model.is_finite() {
        return Err(Error::NonFinite("checkpoint holds non-finite parameters".into()));
    }
    Ok(TrainedModel {
        context_config: header.context,
        vocab,
        model,
    })
}

pub fn save_checkpoint(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, SynthParams};
    use crate::encoder::build_vocab;

    fn model() -> TrainedModel {
        let synth = generate_synthetic_corpus(1, SynthParams::default()).unwrap();
        let vocab = build_vocab(&synth.corpus, 1).unwrap();
        let model = BiEncoder::new(EncoderConfig::toy(), vocab.len(), vocab.num_characters(), 9).unwrap();
        TrainedModel {
            context_config: ContextConfig::default(),
            vocab,
            model,
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&m, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, m);
        for ((_, _, a), (_, _, b)) in m.model.tensors().iter().zip(back.model.tensors()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(checkpoint_bytes(&back).unwrap(), fs::read(&path).unwrap());
    }

    #[test]
    fn wrong_version_and_corruption() {
        let m = model();
        let old = checkpoint_bytes_versioned(&m, 7).unwrap();
        assert!(matches!(
            checkpoint_from_bytes(&old),
            Err(Error::CheckpointVersion { found: 7, .. })
        ));
        let good = checkpoint_bytes(&m).unwrap();
        assert!(matches!(
            checkpoint_from_bytes(&good[..good.len() - 3]),
            Err(Error::CorruptCheckpoint(_))
        ));
        assert!(matches!(checkpoint_from_bytes(b"nonsense"), Err(Error::CorruptCheckpoint(_))));
    }
}
