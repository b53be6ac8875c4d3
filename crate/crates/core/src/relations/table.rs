//! Cluster labelling, the pair → label table, and chunk attachment.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{fit_tfidf, kmeans_fit_sparse, ClusterModel, RelationLabel, SentimentLexicon, TfidfModel};
use crate::corpus::{DialogueChunk, RelationDescription};
use crate::error::{Error, Result};

pub const KMEANS_MAX_ITERS: usize = 300;
pub const KMEANS_TOL: f64 = 1e-6;
/// Seeded k-means++ initialisations per mining run; the lowest inertia wins.
pub const KMEANS_RESTARTS: usize = 10;

/// ⟨a, label, b⟩ with `a < b` lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationTriple {
    pub a: String,
    pub label: RelationLabel,
    pub b: String,
}

impl fmt::Display for RelationTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.a, self.label, self.b)
    }
}

fn canonical(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Symmetric pair labels with a default for unseen pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationTable {
    labels: BTreeMap<(String, String), RelationLabel>,
    default_label: RelationLabel,
}

impl Default for RelationTable {
    fn default() -> Self {
        RelationTable {
            labels: BTreeMap::new(),
            default_label: RelationLabel::Neutral,
        }
    }
}

impl RelationTable {
    pub fn new(default_label: RelationLabel) -> Self {
        RelationTable {
            labels: BTreeMap::new(),
            default_label,
        }
    }

    pub fn insert(&mut self, a: &str, b: &str, label: RelationLabel) {
        self.labels.insert(canonical(a, b), label);
    }

    pub fn get(&self, a: &str, b: &str) -> RelationLabel {
        self.labels
            .get(&canonical(a, b))
            .copied()
            .unwrap_or(self.default_label)
    }

    pub fn default_label(&self) -> RelationLabel {
        self.default_label
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = RelationTriple> + '_ {
        self.labels.iter().map(|((a, b), l)| RelationTriple {
            a: a.clone(),
            label: *l,
            b: b.clone(),
        })
    }

    /// `#default<TAB>label` followed by one `a<TAB>label<TAB>b` line per pair.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("#default\t{}\n", self.default_label);
        for t in self.iter() {
            let _ = writeln!(out, "{}\t{}\t{}", t.a, t.label, t.b);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

pub fn parse_relation_table(text: &str) -> Result<RelationTable> {
    let mut table = RelationTable::default();
    for (i, line) in text.lines().enumerate() {
        let malformed = |message: String| Error::MalformedRecord {
            line: i + 1,
            message,
        };
        let label = |s: &str| {
            RelationLabel::parse(s).ok_or_else(|| malformed(format!("unknown label `{s}`")))
        };
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["#default", l] => table.default_label = label(l)?,
            [c, ..] if c.starts_with('#') => {}
            [a, l, b] => {
                if a == b {
                    return Err(malformed(format!("self-relation for `{a}`")));
                }
                table.insert(a, b, label(l)?);
            }
            _ => return Err(malformed("expected a<TAB>label<TAB>b".into())),
        }
    }
    Ok(table)
}

pub fn load_relation_table(path: impl AsRef<Path>) -> Result<RelationTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_relation_table(&text)
}

/// Per-description sentiment votes and the per-cluster majority label.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabeling {
    pub compounds: Vec<f64>,
    pub votes: Vec<RelationLabel>,
    pub cluster_labels: Vec<RelationLabel>,
}

pub fn label_clusters(
    model: &ClusterModel,
    descriptions: &[RelationDescription],
    lexicon: &SentimentLexicon,
) -> Result<ClusterLabeling> {
    if model.assignments.len() != descriptions.len() {
        return Err(Error::DimensionMismatch {
            expected: model.assignments.len(),
            actual: descriptions.len(),
        });
    }
    let compounds: Vec<f64> = descriptions
        .iter()
        .map(|d| lexicon.compound(&d.text))
        .collect();
    let votes: Vec<RelationLabel> = compounds
        .iter()
        .map(|&c| RelationLabel::from_compound(c))
        .collect();
    let mut cluster_labels = Vec::with_capacity(model.k);
    for cluster in 0..model.k {
        let members: Vec<usize> = model.members(cluster).collect();
        if members.is_empty() {
            return Err(Error::invalid(format!("cluster {cluster} has no members")));
        }
        cluster_labels.push(RelationLabel::majority(members.iter().map(|&i| votes[i])));
    }
    Ok(ClusterLabeling {
        compounds,
        votes,
        cluster_labels,
    })
}

/// Labels each pair by its descriptions' cluster labels (majority, tie →
/// neutral); pairs without descriptions fall back to neutral.
pub fn build_relation_table(
    descriptions: &[RelationDescription],
    model: &ClusterModel,
    cluster_labels: &[RelationLabel],
) -> Result<RelationTable> {
    if model.assignments.len() != descriptions.len() {
        return Err(Error::DimensionMismatch {
            expected: model.assignments.len(),
            actual: descriptions.len(),
        });
    }
    let mut per_pair: BTreeMap<(String, String), Vec<RelationLabel>> = BTreeMap::new();
    for (d, &cluster) in descriptions.iter().zip(&model.assignments) {
        let label = *cluster_labels
            .get(cluster)
            .ok_or(Error::IndexOutOfRange {
                index: cluster,
                len: cluster_labels.len(),
            })?;
        let (a, b) = d.canonical_pair();
        per_pair
            .entry((a.to_string(), b.to_string()))
            .or_default()
            .push(label);
    }
    let mut table = RelationTable::new(RelationLabel::Neutral);
    for ((a, b), labels) in per_pair {
        table.insert(&a, &b, RelationLabel::majority(labels));
    }
    Ok(table)
}

/// One triple per unordered pair of present characters, in lexicographic
/// pair order.
pub fn attach_relations(chunk: &DialogueChunk, table: &RelationTable) -> Vec<RelationTriple> {
    let names: Vec<&String> = chunk.characters_present.iter().collect();
    let mut out = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            out.push(RelationTriple {
                a: a.to_string(),
                label: table.get(a, b),
                b: b.to_string(),
            });
        }
    }
    out
}

/// Everything produced by one relation-mining run.
#[derive(Debug, Clone)]
pub struct MinedRelations {
    pub tfidf: TfidfModel,
    pub clusters: ClusterModel,
    pub labeling: ClusterLabeling,
    pub table: RelationTable,
}

pub fn mine_relations(
    descriptions: &[RelationDescription],
    lexicon: &SentimentLexicon,
    k: usize,
    seed: u64,
) -> Result<MinedRelations> {
    for d in descriptions {
        d.validate()?;
    }
    let texts: Vec<&str> = descriptions.iter().map(|d| d.text.as_str()).collect();
    let tfidf = fit_tfidf(&texts)?;
    let vectors: Vec<_> = texts.iter().map(|t| tfidf.transform(t)).collect();
    let clusters = kmeans_fit_sparse(&vectors, k, seed, KMEANS_RESTARTS, KMEANS_MAX_ITERS, KMEANS_TOL)?;
    let labeling = label_clusters(&clusters, descriptions, lexicon)?;
    let table = build_relation_table(descriptions, &clusters, &labeling.cluster_labels)?;
    Ok(MinedRelations {
        tfidf,
        clusters,
        labeling,
        table,
    })
}

/// Tab-separated report: one row per description, grouped by cluster.
pub fn cluster_report(descriptions: &[RelationDescription], mined: &MinedRelations) -> String {
    let mut out = String::from("cluster\tcluster_label\tpair\tcompound\tvote\tdescription\n");
    for cluster in 0..mined.clusters.k {
        for i in mined.clusters.members(cluster) {
            let d = &descriptions[i];
            let text = d.text.replace(['\t', '\n'], " ");
            let _ = writeln!(
                out,
                "{cluster}\t{}\t({},{})\t{:.6}\t{}\t{text}",
                mined.labeling.cluster_labels[cluster],
                d.pair[0],
                d.pair[1],
                mined.labeling.compounds[i],
                mined.labeling.votes[i],
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(assignments: Vec<usize>, k: usize) -> ClusterModel {
        ClusterModel {
            k,
            centroids: vec![vec![0.0]; k],
            assignments,
            inertia: 0.0,
            inertia_history: vec![0.0],
            iterations: 1,
            seed: None,
        }
    }

    fn lex() -> SentimentLexicon {
        SentimentLexicon::bundled()
    }

    #[test]
    fn unanimous_and_tied_clusters() {
        let descs = vec![
            RelationDescription::new("A", "B", "loyal friends"),
            RelationDescription::new("A", "C", "kind and warm"),
            RelationDescription::new("B", "C", "bitter enemies"),
            RelationDescription::new("C", "D", "trusted ally"),
        ];
        let m = model(vec![0, 0, 1, 1], 2);
        let l = label_clusters(&m, &descs, &lex()).unwrap();
        assert_eq!(l.cluster_labels, [RelationLabel::Positive, RelationLabel::Neutral]);
    }

    #[test]
    fn empty_cluster_is_an_error() {
        let descs = vec![RelationDescription::new("A", "B", "friends")];
        assert!(label_clusters(&model(vec![0], 2), &descs, &lex()).is_err());
    }

    #[test]
    fn table_lookup_and_default() {
        let descs = vec![
            RelationDescription::new("B", "A", "x"),
            RelationDescription::new("A", "B", "y"),
            RelationDescription::new("A", "B", "z"),
            RelationDescription::new("C", "A", "w"),
            RelationDescription::new("D", "C", "v"),
            RelationDescription::new("D", "C", "u"),
        ];
        use RelationLabel::*;
        let m = model(vec![0, 0, 1, 0, 0, 1], 2);
        let t = build_relation_table(&descs, &m, &[Positive, Negative]).unwrap();
        assert_eq!(t.get("A", "B"), Positive);
        assert_eq!(t.get("B", "A"), Positive);
        assert_eq!(t.get("A", "C"), Positive);
        assert_eq!(t.get("C", "D"), Neutral);
        assert_eq!(t.get("A", "Z"), Neutral);
    }

    #[test]
    fn attach_counts_pairs() {
        use crate::corpus::Turn;
        let turns = ["C", "A", "B", "A"]
            .iter()
            .map(|s| Turn::dialogue(*s, "hello"))
            .collect();
        let chunk = DialogueChunk::new("c", "e", "s", turns);
        let mut table = RelationTable::default();
        table.insert("C", "A", RelationLabel::Negative);
        let triples = attach_relations(&chunk, &table);
        assert_eq!(triples.len(), 3);
        let shown: Vec<String> = triples.iter().map(ToString::to_string).collect();
        assert_eq!(
            shown,
            ["<A, neutral, B>", "<A, negative, C>", "<B, neutral, C>"]
        );
        let solo = DialogueChunk::new("d", "e", "s", vec![Turn::dialogue("A", "hi")]);
        assert!(attach_relations(&solo, &table).is_empty());
    }

    #[test]
    fn table_tsv_roundtrip() {
        let mut t = RelationTable::new(RelationLabel::Neutral);
        t.insert("Scanlan", "Keyleth", RelationLabel::Positive);
        t.insert("Grog", "Vexahlia", RelationLabel::Negative);
        let text = t.to_tsv();
        assert_eq!(parse_relation_table(&text).unwrap(), t);
        assert!(parse_relation_table("A\tfriendly\tB\n").is_err());
        assert!(parse_relation_table("A\tpositive\n").is_err());
    }
}
