//! Shared text primitives: tokenization, sentence splitting, corpus
//! statistics, sparse tf-idf vectors, dense embedding composition, and
//! cosine similarity.
//!
//! Everything here is a pure function of its inputs; `VocabularyStats` and
//! `EmbeddingTable` are built once and then shared read-only across workers.

mod embed;
mod token;
mod vocab;

use std::path::PathBuf;

use thiserror::Error;

pub use embed::{embed_doc, DenseVector, EmbedMode, EmbeddingTable};
pub use token::{split_sentences, tokenize, TokenizedDoc};
pub use vocab::{build_vocab_stats, ngram_terms, tfidf_vector, NgramMax, SparseVector, VocabularyStats};

#[derive(Debug, Error)]
pub enum TextError {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("dense vector dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("non-finite vector component")]
    NonFiniteComponent,

    #[error("tf-idf weighted embedding requires vocabulary stats")]
    MissingStats,

    #[error("embedding file has no data lines")]
    EmptyEmbeddingFile,

    #[error("embedding file line {line}: {reason}")]
    EmbeddingParse { line: usize, reason: String },

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
