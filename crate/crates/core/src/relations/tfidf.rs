use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::error::{Error, Result};

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            v[i] = w;
        }
        v
    }
}

/// Fitted TF-IDF vocabulary. Columns are assigned in lexicographic token
/// order; idf is smoothed, `ln((1 + n) / (1 + df)) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    idf: Vec<f64>,
    num_docs: usize,
}

pub fn fit_tfidf<S: AsRef<str>>(documents: &[S]) -> Result<TfidfModel> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in documents {
        let unique: BTreeSet<String> = tokenize(doc.as_ref()).into_iter().collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::invalid("all documents are empty after tokenization"));
    }
    let n = documents.len() as f64;
    let mut terms = Vec::with_capacity(df.len());
    let mut idf = Vec::with_capacity(df.len());
    for (term, count) in df {
        idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
        terms.push(term);
    }
    let index = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(TfidfModel {
        terms,
        index,
        idf,
        num_docs: documents.len(),
    })
}

impl TfidfModel {
    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.column(token).map(|i| self.idf[i])
    }

    /// Raw-count tf times idf, L2-normalised. Text without any in-vocabulary
    /// token maps to the empty vector.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for tok in tokenize(text) {
            if let Some(col) = self.column(&tok) {
                *counts.entry(col).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(col, tf)| (col, tf * self.idf[col]))
            .collect();
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        entries.retain(|(_, w)| *w != 0.0);
        SparseVector {
            dim: self.terms.len(),
            entries,
        }
    }
}
