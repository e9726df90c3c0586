//! Corpus-to-benchmark pipeline for advice-seeking narratives.
//!
//! Converts a dump of advice-seeking forum posts into binary-choice cloze
//! test instances (a masked narrative plus two candidate advice-seeking
//! questions, only one of which was actually asked), and evaluates a
//! narrative-question similarity baseline on the result.
//!
//! The stages, in pipeline order:
//!
//! - [`ingest`] — stream and validate raw posts, honor removal lists
//! - [`text`] — tokenization, tf-idf, cosine, embedding composition
//! - [`cloze`] — question detection, narrative masking, ground-truth choice
//! - [`pairing`] — narrative pairing and instance assembly
//! - [`diversity`] — SVD projection, k-means topics, question keywords
//! - [`eval`] — similarity baseline, accuracy, agreement and error analysis

pub mod cloze;
pub mod diversity;
pub mod eval;
pub mod ingest;
pub mod pairing;
pub mod seeding;
pub mod synthetic;
pub mod text;
