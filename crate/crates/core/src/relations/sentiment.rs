//! Bag-of-tokens valence scoring with compound normalisation.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::error::{Error, Result};

/// Normalisation constant in `s / sqrt(s² + α)`.
pub const DEFAULT_ALPHA: f64 = 15.0;
/// Compound scores at or beyond ±this value are polar.
pub const LABEL_THRESHOLD: f64 = 0.05;

const BUNDLED: &str = include_str!("../../data/lexicon.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationLabel {
    Positive,
    Negative,
    Neutral,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; 3] = [
        RelationLabel::Positive,
        RelationLabel::Negative,
        RelationLabel::Neutral,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RelationLabel::Positive => "positive",
            RelationLabel::Negative => "negative",
            RelationLabel::Neutral => "neutral",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "positive" | "pos" => Some(RelationLabel::Positive),
            "negative" | "neg" => Some(RelationLabel::Negative),
            "neutral" | "neu" => Some(RelationLabel::Neutral),
            _ => None,
        }
    }

    pub fn from_compound(compound: f64) -> Self {
        if compound >= LABEL_THRESHOLD {
            RelationLabel::Positive
        } else if compound <= -LABEL_THRESHOLD {
            RelationLabel::Negative
        } else {
            RelationLabel::Neutral
        }
    }

    fn slot(&self) -> usize {
        match self {
            RelationLabel::Positive => 0,
            RelationLabel::Negative => 1,
            RelationLabel::Neutral => 2,
        }
    }

    /// Strict plurality of `labels`; ties and empty input give neutral.
    pub fn majority<I: IntoIterator<Item = RelationLabel>>(labels: I) -> Self {
        let mut counts = [0usize; 3];
        for l in labels {
            counts[l.slot()] += 1;
        }
        let max = *counts.iter().max().unwrap();
        let winners: Vec<_> = RelationLabel::ALL
            .into_iter()
            .filter(|l| counts[l.slot()] == max)
            .collect();
        match winners.as_slice() {
            [only] if max > 0 => *only,
            _ => RelationLabel::Neutral,
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexicon {
    valences: HashMap<String, f64>,
    alpha: f64,
}

impl SentimentLexicon {
    pub fn new(valences: HashMap<String, f64>, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::invalid(format!("lexicon alpha must be > 0, got {alpha}")));
        }
        if valences.is_empty() {
            return Err(Error::invalid("lexicon is empty"));
        }
        if let Some((t, v)) = valences.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("valence of `{t}` is {v}")));
        }
        Ok(SentimentLexicon { valences, alpha })
    }

    /// Parses `token<TAB>valence` lines; `#` starts a comment line.
    pub fn parse(text: &str, alpha: f64) -> Result<Self> {
        let mut valences = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: &str| Error::MalformedRecord {
                line: i + 1,
                message: message.to_string(),
            };
            let (token, value) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected token<TAB>valence"))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| malformed("valence is not a number"))?;
            valences.insert(token.trim().to_lowercase(), value);
        }
        SentimentLexicon::new(valences, alpha)
    }

    pub fn load(path: impl AsRef<Path>, alpha: f64) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SentimentLexicon::parse(&text, alpha)
    }

    /// The lexicon shipped with the crate, α = 15.
    pub fn bundled() -> Self {
        SentimentLexicon::parse(BUNDLED, DEFAULT_ALPHA).expect("bundled lexicon is well-formed")
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }

    /// Summed valence of in-lexicon tokens and whether anything matched.
    pub fn raw_score(&self, text: &str) -> (f64, bool) {
        let mut sum = 0.0;
        let mut matched = false;
        for tok in tokenize(text) {
            if let Some(v) = self.valence(&tok) {
                sum += v;
                matched = true;
            }
        }
        (sum, matched)
    }

    pub fn normalize(&self, sum: f64) -> f64 {
        sum / (sum * sum + self.alpha).sqrt()
    }

    /// Compound score in (-1, 1); 0 when no token matches.
    pub fn compound(&self, text: &str) -> f64 {
        match self.raw_score(text) {
            (_, false) => 0.0,
            (s, true) => self.normalize(s),
        }
    }

    pub fn label(&self, text: &str) -> RelationLabel {
        RelationLabel::from_compound(self.compound(text))
    }
}
