//! Pipeline configuration: one JSON file holding every path and threshold,
//! with flag overrides for the seed and stage directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use advice_cloze::cloze::{LengthBounds, SelectionConfig};
use advice_cloze::eval::TrainingMeta;
use advice_cloze::pairing::{NeighborSearch, PairBounds, QuestionBounds};
use advice_cloze::text::NgramMax;

use crate::StageError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub diversity: DiversityConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub split: SplitConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub removal_list: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    /// Sentence vectors for the question-pair window; when absent, vectors
    /// are composed from tf-idf weighted word embeddings.
    #[serde(default)]
    pub sentence_vectors: Option<PathBuf>,
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    pub stage_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub specificity: f64,
    pub min_question_words: usize,
    pub narrative_length: [usize; 2],
    pub pair_similarity: [f64; 2],
    pub question_similarity: [f64; 2],
    /// Minimum document frequency for the pairing / feature tf-idf space.
    pub min_df: u32,
    /// 1 = unigrams, 2 = unigrams + bigrams.
    pub ngram_max: u8,
    /// Neighbors kept per narrative during pairing; 0 = exact all-pairs.
    pub top_k_neighbors: usize,
    /// Minimum document frequency for the specificity idf table.
    pub specificity_min_df: u32,
    /// Which documents the specificity idf table is built over.
    pub specificity_stats_source: SpecificityStatsSource,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            specificity: 5.0,
            min_question_words: 5,
            narrative_length: [50, 300],
            pair_similarity: [0.1, 0.8],
            question_similarity: [0.8, 0.95],
            min_df: 50,
            ngram_max: 2,
            top_k_neighbors: 20,
            specificity_min_df: 1,
            specificity_stats_source: SpecificityStatsSource::Narratives,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecificityStatsSource {
    Narratives,
    Questions,
    Both,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiversityConfig {
    pub dims: usize,
    pub k: usize,
    pub max_iter: usize,
    pub top_keywords: usize,
    pub pos_filter: PosFilter,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        Self {
            dims: 100,
            k: 20,
            max_iter: 50,
            top_keywords: 10,
            pos_filter: PosFilter::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosFilter {
    All,
    NounVerb,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train: usize,
    pub test: usize,
    pub heldout: usize,
}

impl PipelineConfig {
    /// Load, resolve relative paths against the config file's directory,
    /// apply overrides, and validate.
    pub fn load(
        config_path: &Path,
        seed_override: Option<u64>,
        stage_dir_override: Option<PathBuf>,
    ) -> Result<Self, StageError> {
        let raw = std::fs::read_to_string(config_path).map_err(|e| {
            StageError::Config(format!("cannot read config {}: {e}", config_path.display()))
        })?;
        let mut config: PipelineConfig = serde_json::from_str(&raw).map_err(|e| {
            StageError::Config(format!("invalid config {}: {e}", config_path.display()))
        })?;
        let base = config_path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        if let Some(p) = config.paths.corpus.as_mut() {
            resolve(p);
        }
        if let Some(p) = config.paths.removal_list.as_mut() {
            resolve(p);
        }
        if let Some(p) = config.paths.embeddings.as_mut() {
            resolve(p);
        }
        if let Some(p) = config.paths.sentence_vectors.as_mut() {
            resolve(p);
        }
        if let Some(p) = config.paths.annotations.as_mut() {
            resolve(p);
        }
        resolve(&mut config.paths.stage_dir);
        if let Some(seed) = seed_override {
            config.seed = seed;
        }
        if let Some(dir) = stage_dir_override {
            config.paths.stage_dir = dir;
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), StageError> {
        let ordered = |name: &str, bounds: [f64; 2]| -> Result<(), StageError> {
            if bounds[0] > bounds[1] {
                Err(StageError::Config(format!(
                    "{name} bounds out of order: {} > {}",
                    bounds[0], bounds[1]
                )))
            } else {
                Ok(())
            }
        };
        ordered("pair_similarity", self.thresholds.pair_similarity)?;
        ordered("question_similarity", self.thresholds.question_similarity)?;
        let [min_len, max_len] = self.thresholds.narrative_length;
        if min_len > max_len {
            return Err(StageError::Config(format!(
                "narrative_length bounds out of order: {min_len} > {max_len}"
            )));
        }
        if self.ngram_max().is_none() {
            return Err(StageError::Config(format!(
                "ngram_max must be 1 or 2, got {}",
                self.thresholds.ngram_max
            )));
        }
        if self.diversity.dims == 0 || self.diversity.k == 0 {
            return Err(StageError::Config(
                "diversity dims and k must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    pub fn ngram_max(&self) -> Option<NgramMax> {
        NgramMax::from_order(self.thresholds.ngram_max)
    }

    pub fn length_bounds(&self) -> LengthBounds {
        LengthBounds {
            min: self.thresholds.narrative_length[0],
            max: self.thresholds.narrative_length[1],
        }
    }

    pub fn selection_config(&self) -> SelectionConfig {
        SelectionConfig {
            specificity_threshold: self.thresholds.specificity,
            min_words: self.thresholds.min_question_words,
        }
    }

    pub fn pair_bounds(&self) -> PairBounds {
        PairBounds {
            lower: self.thresholds.pair_similarity[0],
            upper: self.thresholds.pair_similarity[1],
        }
    }

    pub fn question_bounds(&self) -> QuestionBounds {
        QuestionBounds {
            lower: self.thresholds.question_similarity[0],
            upper: self.thresholds.question_similarity[1],
        }
    }

    pub fn neighbor_search(&self) -> NeighborSearch {
        if self.thresholds.top_k_neighbors == 0 {
            NeighborSearch::Exact
        } else {
            NeighborSearch::TopK(self.thresholds.top_k_neighbors)
        }
    }

    pub fn training_meta(&self) -> TrainingMeta {
        TrainingMeta {
            seed: advice_cloze::seeding::substream_seed(self.seed, "train", ""),
            learning_rate: self.baseline.learning_rate,
            epochs: self.baseline.epochs,
            l2: self.baseline.l2,
        }
    }

    /// Path of a stage artifact inside the stage directory.
    pub fn artifact(&self, name: &str) -> PathBuf {
        self.paths.stage_dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.json");
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn minimal_config_gets_defaults_and_resolved_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"seed": 7, "paths": {"corpus": "posts.jsonl", "stage_dir": "out"}}"#,
        );
        let config = PipelineConfig::load(&path, None, None).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.paths.corpus.unwrap(), dir.path().join("posts.jsonl"));
        assert_eq!(config.paths.stage_dir, dir.path().join("out"));
        assert_eq!(config.thresholds.specificity, 5.0);
        assert_eq!(config.thresholds.min_df, 50);
        assert_eq!(config.thresholds.narrative_length, [50, 300]);
    }

    #[test]
    fn overrides_take_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), r#"{"seed": 7, "paths": {"stage_dir": "out"}}"#);
        let config =
            PipelineConfig::load(&path, Some(99), Some(PathBuf::from("/tmp/elsewhere"))).unwrap();
        assert_eq!(config.seed, 99);
        assert_eq!(config.paths.stage_dir, PathBuf::from("/tmp/elsewhere"));
    }

    #[test]
    fn unordered_bounds_are_a_config_violation() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"seed": 1, "paths": {"stage_dir": "out"},
                "thresholds": {"pair_similarity": [0.9, 0.1]}}"#,
        );
        assert!(matches!(
            PipelineConfig::load(&path, None, None),
            Err(StageError::Config(_))
        ));
    }

    #[test]
    fn missing_seed_is_a_config_violation() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), r#"{"paths": {"stage_dir": "out"}}"#);
        assert!(matches!(
            PipelineConfig::load(&path, None, None),
            Err(StageError::Config(_))
        ));
    }

    #[test]
    fn bad_ngram_order_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"seed": 1, "paths": {"stage_dir": "out"}, "thresholds": {"ngram_max": 3}}"#,
        );
        assert!(matches!(
            PipelineConfig::load(&path, None, None),
            Err(StageError::Config(_))
        ));
    }
}
