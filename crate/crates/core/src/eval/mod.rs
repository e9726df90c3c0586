//! Baseline evaluation: similarity features, the logistic choice model,
//! dataset splitting, accuracy reporting, annotation analysis, and the
//! question-concreteness error analysis.

mod annotation;
mod features;
mod model;
mod stats;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::VocabularyStats;

pub use annotation::{
    cohen_kappa, first_per_instance, label_distribution, pair_type_breakdown, read_annotations,
    AggregateRow, AnnotationRecord, BucketStats, LabelDistribution, PairTypeBreakdown,
    Plausibility,
};
pub use features::{FeatureContext, FeatureVector, FEATURE_NAMES};
pub use model::{
    evaluate, loss_and_gradient, predict, score_difference, sigmoid, split_dataset,
    train_choice_model, Accuracy, ChoiceModel, LabeledFeatures, TrainOutcome, TrainingMeta,
};
pub use stats::{student_t_p_two_sided, welch_t_test, WelchTTest};

/// Mean idf of a question's tokens, counting out-of-vocabulary tokens as 0.
pub fn question_mean_idf(tokens: &[String], stats: &VocabularyStats) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    tokens.iter().map(|t| stats.idf(t).unwrap_or(0.0)).sum::<f64>() / tokens.len() as f64
}

/// Per-instance input to the concreteness analysis.
#[derive(Debug, Clone)]
pub struct ConcretenessItem {
    /// Mean token idf of the ground-truth question.
    pub mean_idf: f64,
    /// First token of the ground-truth question.
    pub leading_word: String,
    pub correct: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterrogativeAccuracy {
    pub word: String,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Result of comparing ground-truth question idf between correctly and
/// incorrectly predicted instances, plus accuracy by leading interrogative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcretenessReport {
    pub mean_idf_correct: f64,
    pub mean_idf_incorrect: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub by_interrogative: Vec<InterrogativeAccuracy>,
}

/// `None` when either the correct or the incorrect group has fewer than two
/// members, which leaves the t-test undefined.
pub fn concreteness_analysis(items: &[ConcretenessItem]) -> Option<ConcretenessReport> {
    let correct_idfs: Vec<f64> = items.iter().filter(|i| i.correct).map(|i| i.mean_idf).collect();
    let incorrect_idfs: Vec<f64> =
        items.iter().filter(|i| !i.correct).map(|i| i.mean_idf).collect();
    let test = welch_t_test(&correct_idfs, &incorrect_idfs)?;

    let mut groups: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for item in items {
        let entry = groups.entry(item.leading_word.as_str()).or_insert((0, 0));
        entry.0 += 1;
        if item.correct {
            entry.1 += 1;
        }
    }
    let mut by_interrogative: Vec<InterrogativeAccuracy> = groups
        .into_iter()
        .map(|(word, (n, correct))| InterrogativeAccuracy {
            word: word.to_string(),
            n,
            correct,
            accuracy: correct as f64 / n as f64,
        })
        .collect();
    by_interrogative.sort_by(|a, b| b.n.cmp(&a.n).then_with(|| a.word.cmp(&b.word)));

    Some(ConcretenessReport {
        mean_idf_correct: test.mean_a,
        mean_idf_incorrect: test.mean_b,
        t_statistic: test.t_statistic,
        p_value: test.p_two_sided,
        by_interrogative,
    })
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,

    #[error("label sequences differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("agreement undefined: chance agreement is 1 but observed is not")]
    DegenerateAgreement,

    #[error("split sizes request {requested} items but only {available} exist")]
    SplitTooLarge { requested: usize, available: usize },

    #[error("annotation file {path}: {reason}")]
    AnnotationCsv { path: PathBuf, reason: String },
}
