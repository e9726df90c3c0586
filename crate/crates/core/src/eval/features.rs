//! Narrative-question similarity features.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::text::{
    embed_doc, tfidf_vector, EmbedMode, EmbeddingTable, TextError, TokenizedDoc, VocabularyStats,
};

/// The four features the choice model combines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub tfidf_cos: f64,
    pub weighted_embed_cos: f64,
    pub mean_embed_cos: f64,
    pub content_overlap: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.tfidf_cos,
            self.weighted_embed_cos,
            self.mean_embed_cos,
            self.content_overlap,
        ]
    }

    /// Component-wise difference; the model scores `f(a) - f(b)`.
    pub fn difference(&self, other: &FeatureVector) -> [f64; 4] {
        let a = self.as_array();
        let b = other.as_array();
        [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
    }
}

pub const FEATURE_NAMES: [&str; 4] = [
    "tfidf_cos",
    "weighted_embed_cos",
    "mean_embed_cos",
    "content_overlap",
];

/// Shared state for feature extraction: corpus stats, word vectors, and the
/// idf cut separating content words from function words.
pub struct FeatureContext<'a> {
    pub stats: &'a VocabularyStats,
    pub table: &'a EmbeddingTable,
    pub median_idf: f64,
}

impl<'a> FeatureContext<'a> {
    pub fn new(stats: &'a VocabularyStats, table: &'a EmbeddingTable) -> Self {
        Self {
            stats,
            table,
            median_idf: stats.median_idf(),
        }
    }

    /// Unique tokens whose idf lies strictly above the corpus median.
    fn content_words<'t>(&self, doc: &'t TokenizedDoc) -> BTreeSet<&'t str> {
        doc.tokens
            .iter()
            .map(String::as_str)
            .filter(|token| self.stats.idf(token).is_some_and(|idf| idf > self.median_idf))
            .collect()
    }

    /// All four features for one narrative-question pair. The overlap is
    /// directional: how much of the question's content the narrative covers.
    pub fn extract(
        &self,
        narrative: &TokenizedDoc,
        question: &TokenizedDoc,
    ) -> Result<FeatureVector, TextError> {
        let tfidf_cos =
            tfidf_vector(narrative, self.stats).cosine(&tfidf_vector(question, self.stats));
        let weighted_n = embed_doc(narrative, self.table, Some(self.stats), EmbedMode::TfidfWeighted)?;
        let weighted_q = embed_doc(question, self.table, Some(self.stats), EmbedMode::TfidfWeighted)?;
        let mean_n = embed_doc(narrative, self.table, None, EmbedMode::Mean)?;
        let mean_q = embed_doc(question, self.table, None, EmbedMode::Mean)?;
        let question_content = self.content_words(question);
        let content_overlap = if question_content.is_empty() {
            0.0
        } else {
            let narrative_content = self.content_words(narrative);
            let shared = question_content
                .iter()
                .filter(|t| narrative_content.contains(*t))
                .count();
            shared as f64 / question_content.len() as f64
        };
        Ok(FeatureVector {
            tfidf_cos,
            weighted_embed_cos: weighted_n.cosine(&weighted_q)?,
            mean_embed_cos: mean_n.cosine(&mean_q)?,
            content_overlap,
        })
    }
}
