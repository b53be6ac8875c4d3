//! Line-delimited JSON persistence for corpora and relation descriptions.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::{Corpus, DialogueChunk, RelationDescription, Turn, TurnKind};
use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTurn {
    speaker: String,
    text: String,
    kind: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChunk {
    chunk_id: String,
    episode_id: String,
    summary: String,
    turns: Vec<RawTurn>,
    characters_present: Vec<String>,
}

fn lines<R: Read>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
}

/// Parses a corpus from line-delimited chunk records.
pub fn parse_corpus<R: Read>(reader: R, origin: &Path) -> Result<Corpus> {
    let mut chunks = Vec::new();
    for (line_no, line) in lines(reader) {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawChunk = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: line_no,
            message: e.to_string(),
        })?;
        let turns = raw
            .turns
            .into_iter()
            .map(|t| {
                let kind = TurnKind::parse(&t.kind).ok_or(Error::UnknownKind {
                    line: line_no,
                    kind: t.kind.clone(),
                })?;
                Ok(Turn {
                    speaker: t.speaker,
                    text: t.text,
                    kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let chunk = DialogueChunk {
            chunk_id: raw.chunk_id,
            episode_id: raw.episode_id,
            summary: raw.summary,
            turns,
            characters_present: raw.characters_present.into_iter().collect(),
        };
        chunk.validate()?;
        chunks.push(chunk);
    }
    if chunks.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Corpus::new(chunks)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(file, path)
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut writer: W) -> std::io::Result<()> {
    for chunk in corpus.chunks() {
        serde_json::to_writer(&mut writer, chunk)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(corpus, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn parse_relation_descriptions<R: Read>(
    reader: R,
    origin: &Path,
) -> Result<Vec<RelationDescription>> {
    let mut out = Vec::new();
    for (line_no, line) in lines(reader) {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let desc: RelationDescription =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        desc.validate().map_err(|e| Error::MalformedRecord {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(desc);
    }
    Ok(out)
}

pub fn load_relation_descriptions(path: impl AsRef<Path>) -> Result<Vec<RelationDescription>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_relation_descriptions(file, path)
}

pub fn write_relation_descriptions<W: Write>(
    descriptions: &[RelationDescription],
    mut writer: W,
) -> std::io::Result<()> {
    for d in descriptions {
        serde_json::to_writer(&mut writer, d)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_relation_descriptions(
    descriptions: &[RelationDescription],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_relation_descriptions(descriptions, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Corpus> {
        parse_corpus(text.as_bytes(), Path::new("<test>"))
    }

    const GOOD: &str = r#"{"chunk_id":"c0","episode_id":"e0","summary":"s","turns":[{"speaker":"A","text":"hi","kind":"dialogue"}],"characters_present":["A"]}"#;

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse(""), Err(Error::EmptyCorpus)));
        assert!(matches!(parse("\n\n"), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn empty_turns_names_chunk() {
        let rec = r#"{"chunk_id":"lonely","episode_id":"e0","summary":"s","turns":[],"characters_present":[]}"#;
        let err = parse(rec).unwrap_err();
        assert!(matches!(&err, Error::EmptyChunk(id) if id == "lonely"));
        assert!(err.to_string().contains("lonely"));
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = format!("{GOOD}\n{{not json\n");
        match parse(&text) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_kind_rejected() {
        let rec = GOOD.replace("\"dialogue\"", "\"aside\"");
        assert!(matches!(parse(&rec), Err(Error::UnknownKind { line: 1, .. })));
    }

    #[test]
    fn duplicate_chunk_rejected() {
        let text = format!("{GOOD}\n{GOOD}\n");
        assert!(matches!(parse(&text), Err(Error::DuplicateChunk(_))));
    }

    #[test]
    fn relation_file_roundtrip() {
        let descs = vec![
            RelationDescription::new("Pike", "Vexahlia", "fond rapport"),
            RelationDescription::new("Grog", "Trinket", "almost got him killed"),
        ];
        let mut buf = Vec::new();
        write_relation_descriptions(&descs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"pair":["Pike","Vexahlia"],"text":"fond rapport"}"#));
        let back = parse_relation_descriptions(buf.as_slice(), Path::new("<t>")).unwrap();
        assert_eq!(back, descs);
    }
}
