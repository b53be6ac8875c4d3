#!/usr/bin/env python3
"""Independent statistics and checksums for the synthetic fixture.

Recomputes per-file chunk/turn counts, mean turns and characters per chunk,
the min_freq=2 vocabulary size of the training split, and sha256 digests,
then writes manifest.json next to the files. Uses only the stdlib.
"""
import hashlib
import json
import sys
from collections import Counter
from pathlib import Path

FILES = ["corpus.jsonl", "relations.jsonl", "train.jsonl", "valid.jsonl", "test.jsonl"]
# [PAD] [UNK] [SEP] [CLS] and the three relation label words
RESERVED = 4 + 3


def tokens(text):
    out, cur = [], []
    for ch in text:
        if ch.isalnum():
            cur.append(ch.lower())
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def chunks(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def corpus_stats(rows):
    turns = sum(len(r["turns"]) for r in rows)
    chars = sum(len({t["speaker"] for t in r["turns"]}) for r in rows)
    speakers = {t["speaker"] for r in rows for t in r["turns"]}
    return {
        "chunks": len(rows),
        "turns": turns,
        "characters": len(speakers),
        "avg_turns_per_chunk": turns / len(rows),
        "avg_characters_per_chunk": chars / len(rows),
    }


def vocab_size(rows, min_freq):
    speakers = {t["speaker"] for r in rows for t in r["turns"]}
    reserved = {"[pad]", "positive", "negative", "neutral"}
    counts = Counter()
    for r in rows:
        for text in [t["text"] for t in r["turns"]] + [r["summary"]]:
            counts.update(tokens(text))
    words = [w for w, c in counts.items() if c >= min_freq and w not in reserved]
    return RESERVED + len(speakers) + len(words)


def main(root):
    root = Path(root)
    manifest = {"sha256": {}, "stats": {}}
    for name in FILES:
        manifest["sha256"][name] = hashlib.sha256((root / name).read_bytes()).hexdigest()
    for name in FILES:
        if name != "relations.jsonl":
            manifest["stats"][name] = corpus_stats(chunks(root / name))
    manifest["train_vocab_min_freq_2"] = vocab_size(chunks(root / "train.jsonl"), 2)
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(json.dumps(manifest, indent=2, sort_keys=True))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/fixtures/synthetic")
