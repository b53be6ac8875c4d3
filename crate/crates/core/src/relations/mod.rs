//! Relation mining: descriptions → TF-IDF → k-means → sentiment-labelled
//! clusters → a symmetric pair table attached to every chunk.

mod kmeans;
mod sentiment;
mod table;
mod tfidf;

pub use kmeans::{kmeans_fit, kmeans_fit_from, kmeans_fit_restarts, kmeans_fit_sparse, kmeans_plus_plus, ClusterModel};
pub use sentiment::{RelationLabel, SentimentLexicon, DEFAULT_ALPHA, LABEL_THRESHOLD};
pub use table::{
    attach_relations, build_relation_table, cluster_report, label_clusters, load_relation_table,
    mine_relations, parse_relation_table, ClusterLabeling, MinedRelations, RelationTable,
    RelationTriple,
};
pub use tfidf::{fit_tfidf, SparseVector, TfidfModel};

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Default number of clusters fed into training.
pub const DEFAULT_CLUSTERS: usize = 3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Pike and Vex!"), ["pike", "and", "vex"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Vox-Machina's 3rd"), ["vox", "machina", "s", "3rd"]);
        assert_eq!(tokenize("  --  "), Vec::<String>::new());
    }
}
