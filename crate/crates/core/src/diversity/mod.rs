//! Topical diversity analysis: low-rank projection of tf-idf narratives,
//! k-means clustering, and per-topic question keyword surfacing.

mod kmeans;
mod svd;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::text::{SparseVector, TokenizedDoc, VocabularyStats};

pub use kmeans::{cluster_topics, KMeansResult};
pub use svd::{truncated_svd, SvdMode, SvdOptions, TruncatedSvd};

/// Narratives projected into a low-rank latent space.
#[derive(Debug, Clone)]
pub struct ProjectedCorpus {
    pub doc_ids: Vec<String>,
    /// n_docs x dims rows: left singular vectors scaled by singular values.
    pub matrix: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    /// Column order of the underlying document-term matrix.
    pub terms: Vec<String>,
    /// vocab x dims right singular vectors.
    pub term_factors: Vec<Vec<f64>>,
}

/// Project tf-idf rows onto their top `dims` latent directions.
pub fn project_corpus(
    docs: &[(String, SparseVector)],
    dims: usize,
    options: &SvdOptions,
) -> Result<ProjectedCorpus, DiversityError> {
    if docs.is_empty() {
        return Err(DiversityError::EmptyCorpus);
    }
    // Fix the column order: sorted union of all supports.
    let mut term_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, vector) in docs {
        for term in vector.entries.keys() {
            let next = term_index.len();
            term_index.entry(term.as_str()).or_insert(next);
        }
    }
    let terms: Vec<String> = {
        let mut terms = vec![String::new(); term_index.len()];
        for (term, &index) in &term_index {
            terms[index] = term.to_string();
        }
        terms
    };
    let rows: Vec<Vec<(usize, f64)>> = docs
        .iter()
        .map(|(_, vector)| {
            vector
                .entries
                .iter()
                .map(|(term, &weight)| (term_index[term.as_str()], weight))
                .collect()
        })
        .collect();
    let svd = truncated_svd(&rows, terms.len(), dims, options)?;
    Ok(ProjectedCorpus {
        doc_ids: docs.iter().map(|(id, _)| id.clone()).collect(),
        matrix: svd.row_factors,
        singular_values: svd.singular_values,
        terms,
        term_factors: svd.col_factors,
    })
}

/// One discovered topic: its member narratives and ranked question keywords.
#[derive(Debug, Clone, Serialize)]
pub struct TopicCluster {
    pub cluster_id: usize,
    pub member_ids: Vec<String>,
    pub keywords: Vec<(String, f64)>,
}

/// Score a term by how much more often it appears in the cluster's question
/// documents than in the whole question corpus:
/// df_cluster(t)/|cluster| - df_global(t)/n_docs.
///
/// `pos_filter` optionally restricts candidate terms (e.g. to likely nouns
/// and verbs); `None` accepts everything.
pub fn topic_keywords(
    cluster_question_docs: &[&TokenizedDoc],
    global_stats: &VocabularyStats,
    pos_filter: Option<&dyn Fn(&str) -> bool>,
    top_n: usize,
) -> Vec<(String, f64)> {
    if cluster_question_docs.is_empty() {
        return Vec::new();
    }
    let mut cluster_df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in cluster_question_docs {
        let unique: std::collections::BTreeSet<&str> =
            doc.tokens.iter().map(String::as_str).collect();
        for token in unique {
            if pos_filter.map_or(true, |accept| accept(token)) {
                *cluster_df.entry(token).or_insert(0) += 1;
            }
        }
    }
    let cluster_size = cluster_question_docs.len() as f64;
    let global_n = global_stats.n_docs as f64;
    let mut scored: Vec<(String, f64)> = cluster_df
        .into_iter()
        .map(|(term, df_cluster)| {
            let df_global = global_stats.df.get(term).copied().unwrap_or(0) as f64;
            let score = df_cluster as f64 / cluster_size - df_global / global_n;
            (term.to_string(), score)
        })
        .collect();
    scored.sort_by(|(ta, sa), (tb, sb)| sb.total_cmp(sa).then_with(|| ta.cmp(tb)));
    scored.truncate(top_n);
    scored
}

/// Suffix-and-stoplist heuristic for keeping likely nouns and verbs. Closed
/// class words (pronouns, determiners, prepositions, auxiliaries) and -ly
/// adverbs are rejected; no real tagger is involved.
pub fn noun_verb_heuristic(token: &str) -> bool {
    const FUNCTION_WORDS: &[&str] = &[
        "a", "an", "the", "this", "that", "these", "those", "some", "any", "no", "every", "each",
        "i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "he", "him", "his",
        "she", "her", "hers", "it", "its", "we", "us", "our", "ours", "they", "them", "their",
        "theirs", "who", "whom", "whose", "what", "which", "when", "where", "why", "how", "and",
        "or", "but", "nor", "so", "yet", "if", "then", "than", "because", "while", "although",
        "though", "of", "in", "on", "at", "by", "for", "with", "about", "against", "between",
        "into", "through", "during", "before", "after", "above", "below", "to", "from", "up",
        "down", "out", "off", "over", "under", "again", "further", "once", "here", "there", "all",
        "both", "few", "more", "most", "other", "such", "only", "own", "same", "too", "very",
        "not", "now", "just", "also", "am", "is", "are", "was", "were", "be", "been", "being",
        "do", "does", "did", "have", "has", "had", "will", "would", "shall", "should", "can",
        "could", "may", "might", "must",
    ];
    if token.is_empty() || !token.chars().all(char::is_alphabetic) {
        return false;
    }
    if FUNCTION_WORDS.contains(&token) {
        return false;
    }
    !(token.ends_with("ly") && token.len() > 3)
}

#[derive(Debug, Error)]
pub enum DiversityError {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("dims {dims} out of range, must be in 1..={max}")]
    DimsOutOfRange { dims: usize, max: usize },

    #[error("k = {k} out of range for {n_docs} documents")]
    KOutOfRange { k: usize, n_docs: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{build_vocab_stats, NgramMax};

    fn doc(id: &str, words: &[&str]) -> TokenizedDoc {
        TokenizedDoc::from_tokens(id, words.iter().map(|w| w.to_string()).collect())
    }

    #[test]
    fn projection_keeps_doc_order_and_shape() {
        let docs = vec![
            (
                "d0".to_string(),
                SparseVector {
                    entries: [("a".to_string(), 1.0)].into_iter().collect(),
                },
            ),
            (
                "d1".to_string(),
                SparseVector {
                    entries: [("b".to_string(), 2.0)].into_iter().collect(),
                },
            ),
        ];
        let projected = project_corpus(&docs, 2, &SvdOptions::default()).unwrap();
        assert_eq!(projected.doc_ids, vec!["d0", "d1"]);
        assert_eq!(projected.matrix.len(), 2);
        assert_eq!(projected.matrix[0].len(), 2);
        assert_eq!(projected.terms, vec!["a", "b"]);
        // Diagonal matrix: singular values are the weights, descending.
        assert!((projected.singular_values[0] - 2.0).abs() < 1e-12);
        assert!((projected.singular_values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ubiquitous_term_scores_zero() {
        let global_docs = vec![doc("q0", &["move", "city"]), doc("q1", &["move", "job"])];
        let stats = build_vocab_stats(global_docs.iter(), NgramMax::Unigrams, 1).unwrap();
        let cluster: Vec<&TokenizedDoc> = global_docs.iter().collect();
        let keywords = topic_keywords(&cluster, &stats, None, 10);
        let move_score = keywords.iter().find(|(t, _)| t == "move").unwrap().1;
        assert!(move_score.abs() < 1e-12);
    }

    #[test]
    fn keyword_score_matches_ratio_arithmetic() {
        // Term in 80% of cluster docs, 10% of global docs -> 0.7.
        let mut global_docs: Vec<TokenizedDoc> = Vec::new();
        for i in 0..10 {
            let words: Vec<&str> = if i == 0 { vec!["roommate", "x"] } else { vec!["x"] };
            global_docs.push(doc(&format!("g{i}"), &words));
        }
        let stats = build_vocab_stats(global_docs.iter(), NgramMax::Unigrams, 1).unwrap();
        let cluster_docs: Vec<TokenizedDoc> = (0..5)
            .map(|i| {
                let words: Vec<&str> = if i < 4 { vec!["roommate"] } else { vec!["x"] };
                doc(&format!("c{i}"), &words)
            })
            .collect();
        let cluster: Vec<&TokenizedDoc> = cluster_docs.iter().collect();
        let keywords = topic_keywords(&cluster, &stats, None, 10);
        let score = keywords.iter().find(|(t, _)| t == "roommate").unwrap().1;
        assert!((score - 0.7).abs() < 1e-12);
    }

    #[test]
    fn keyword_scores_are_bounded() {
        let global_docs = vec![doc("g", &["alpha", "beta", "gamma"])];
        let stats = build_vocab_stats(global_docs.iter(), NgramMax::Unigrams, 1).unwrap();
        let cluster_docs = vec![doc("c", &["alpha", "delta"])];
        let cluster: Vec<&TokenizedDoc> = cluster_docs.iter().collect();
        for (_, score) in topic_keywords(&cluster, &stats, None, 10) {
            assert!((-1.0..=1.0).contains(&score));
        }
    }

    #[test]
    fn pos_filter_restricts_candidates() {
        let global_docs = vec![doc("g", &["the", "roommate"])];
        let stats = build_vocab_stats(global_docs.iter(), NgramMax::Unigrams, 1).unwrap();
        let cluster_docs = vec![doc("c", &["the", "roommate", "quickly"])];
        let cluster: Vec<&TokenizedDoc> = cluster_docs.iter().collect();
        let keywords = topic_keywords(&cluster, &stats, Some(&noun_verb_heuristic), 10);
        let terms: Vec<&str> = keywords.iter().map(|(t, _)| t.as_str()).collect();
        assert!(terms.contains(&"roommate"));
        assert!(!terms.contains(&"the"));
        assert!(!terms.contains(&"quickly"));
    }

    #[test]
    fn empty_cluster_yields_no_keywords() {
        let global_docs = vec![doc("g", &["x"])];
        let stats = build_vocab_stats(global_docs.iter(), NgramMax::Unigrams, 1).unwrap();
        assert!(topic_keywords(&[], &stats, None, 5).is_empty());
    }
}
