//! The eight pipeline stages. Each stage reads upstream artifacts from the
//! stage directory, writes its own artifacts atomically, and updates its
//! rows in `counts.csv`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use advice_cloze::cloze::{extract_post, ExtractOutcome, NarrativeRecord};
use advice_cloze::diversity::{
    cluster_topics, noun_verb_heuristic, project_corpus, topic_keywords, SvdOptions,
};
use advice_cloze::eval::{
    concreteness_analysis, evaluate, question_mean_idf, split_dataset, train_choice_model,
    Accuracy, ChoiceModel, ConcretenessItem, ConcretenessReport, FeatureContext, LabeledFeatures,
};
use advice_cloze::ingest::{apply_removal_list, load_posts, Post, RemovalList};
use advice_cloze::pairing::{
    assemble_instance, build_pair_candidates, choose_masked_narrative, filter_question_pair,
    greedy_pair, instance_id, ClozeInstance, NarrativePair, PairCandidate, PairingError,
    SentenceVectorStore, Slot,
};
use advice_cloze::seeding::{substream_rng, substream_seed};
use advice_cloze::text::{
    build_vocab_stats, tfidf_vector, EmbeddingTable, NgramMax, SparseVector, TokenizedDoc,
    VocabularyStats,
};

use crate::config::{PipelineConfig, PosFilter, SpecificityStatsSource};
use crate::counts::StageCounts;
use crate::report;
use crate::util::{read_jsonl, write_atomic, write_jsonl};
use crate::StageError;

pub const POSTS_FILE: &str = "posts.jsonl";
pub const NARRATIVES_FILE: &str = "narratives.jsonl";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const INSTANCES_FILE: &str = "instances.jsonl";
pub const DISCARDED_FILE: &str = "discarded_narratives.jsonl";
pub const COUNTS_FILE: &str = "counts.csv";
pub const DIVERSITY_FILE: &str = "diversity.csv";
pub const MODEL_FILE: &str = "model.json";
pub const EVAL_JSON_FILE: &str = "eval.json";
pub const EVAL_CSV_FILE: &str = "eval.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "lowercase")]
pub enum StageName {
    Ingest,
    Extract,
    Pair,
    Build,
    Diversity,
    Train,
    Evaluate,
    Report,
}

pub fn run_stage(stage: StageName, config: &PipelineConfig) -> Result<(), StageError> {
    match stage {
        StageName::Ingest => run_ingest(config),
        StageName::Extract => run_extract(config),
        StageName::Pair => run_pair(config),
        StageName::Build => run_build(config),
        StageName::Diversity => run_diversity(config),
        StageName::Train => run_train(config),
        StageName::Evaluate => run_evaluate(config),
        StageName::Report => report::run_report(config),
    }
}

/// An upstream artifact that must already exist; missing means the producing
/// stage has not run.
pub fn require_artifact(
    config: &PipelineConfig,
    name: &str,
    produced_by: &str,
) -> Result<PathBuf, StageError> {
    let path = config.artifact(name);
    if path.exists() {
        Ok(path)
    } else {
        Err(StageError::MissingArtifact {
            artifact: path,
            produced_by: produced_by.to_string(),
        })
    }
}

/// A path the config must provide (and that must exist on disk).
fn require_config_path<'a>(
    path: &'a Option<PathBuf>,
    what: &str,
) -> Result<&'a Path, StageError> {
    let path = path
        .as_deref()
        .ok_or_else(|| StageError::Config(format!("config does not set paths.{what}")))?;
    if path.exists() {
        Ok(path)
    } else {
        Err(StageError::Config(format!(
            "paths.{what} = {} is not readable",
            path.display()
        )))
    }
}

fn update_counts(
    config: &PipelineConfig,
    stage: &str,
    metrics: Vec<(String, u64)>,
) -> Result<(), StageError> {
    let path = config.artifact(COUNTS_FILE);
    let mut counts = StageCounts::load(&path)?;
    counts.replace_stage(stage, metrics);
    counts.write(&path)
}

fn metric(name: &str, value: usize) -> (String, u64) {
    (name.to_string(), value as u64)
}

// --- ingest ---------------------------------------------------------------

pub fn run_ingest(config: &PipelineConfig) -> Result<(), StageError> {
    let corpus = require_config_path(&config.paths.corpus, "corpus")?;
    let mut stream =
        load_posts(corpus).map_err(|e| StageError::failure(format!("ingest: {e}")))?;
    let posts: Vec<Post> = stream.by_ref().collect();
    if let Some(error) = stream.io_error() {
        return Err(StageError::failure(format!("ingest: {error}")));
    }
    let summary = stream.into_summary();
    for warning in &summary.warnings {
        eprintln!("ingest: skipped {warning}");
    }

    let (kept, removal_summary) = match &config.paths.removal_list {
        Some(path) => {
            let (list, malformed) = RemovalList::load(path)
                .map_err(|e| StageError::failure(format!("ingest: {e}")))?;
            if malformed > 0 {
                eprintln!("ingest: {malformed} malformed removal-list lines ignored");
            }
            apply_removal_list(posts, &list)
        }
        None => apply_removal_list(posts, &RemovalList::default()),
    };
    for id in &removal_summary.absent_ids {
        eprintln!("ingest: removal id {id} not present in corpus");
    }

    write_jsonl(&config.artifact(POSTS_FILE), &kept)?;
    update_counts(
        config,
        "ingest",
        vec![
            metric("input_lines", summary.lines_read),
            metric("unique_posts", summary.valid),
            metric("skipped_invalid", summary.skipped()),
            metric("removed_by_request", removal_summary.removed),
            metric("posts_out", kept.len()),
        ],
    )?;
    println!(
        "ingest: {} posts kept ({} lines read, {} skipped, {} removed)",
        kept.len(),
        summary.lines_read,
        summary.skipped(),
        removal_summary.removed
    );
    Ok(())
}

// --- extract ---------------------------------------------------------------

fn specificity_stats(
    posts: &[Post],
    config: &PipelineConfig,
) -> Result<Option<VocabularyStats>, StageError> {
    use advice_cloze::cloze::{detect_questions, mask_narrative, passes_length_filter, DetectedBy};

    let bounds = config.length_bounds();
    let mut docs: Vec<TokenizedDoc> = Vec::new();
    let source = config.thresholds.specificity_stats_source;
    for post in posts {
        if post.body.trim().is_empty() {
            continue;
        }
        let candidates = detect_questions(post);
        if candidates.is_empty() {
            continue;
        }
        if matches!(source, SpecificityStatsSource::Narratives | SpecificityStatsSource::Both) {
            let narrative = mask_narrative(post, &candidates);
            if passes_length_filter(&narrative, bounds) {
                docs.push(TokenizedDoc::new(post.id.clone(), &narrative.masked_text));
            }
        }
        if matches!(source, SpecificityStatsSource::Questions | SpecificityStatsSource::Both) {
            for candidate in candidates
                .iter()
                .filter(|c| c.detected_by == DetectedBy::Terminator)
            {
                docs.push(TokenizedDoc::new(
                    format!("{}#q{}", post.id, candidate.sentence_index),
                    &candidate.text,
                ));
            }
        }
    }
    if docs.is_empty() {
        return Ok(None);
    }
    let stats = build_vocab_stats(
        docs.iter(),
        NgramMax::Unigrams,
        config.thresholds.specificity_min_df,
    )
    .map_err(|e| StageError::failure(format!("extract: {e}")))?;
    Ok(Some(stats))
}

pub fn run_extract(config: &PipelineConfig) -> Result<(), StageError> {
    let posts_path = require_artifact(config, POSTS_FILE, "ingest")?;
    let posts: Vec<Post> = read_jsonl(&posts_path)?;

    let stats = specificity_stats(&posts, config)?;
    let bounds = config.length_bounds();
    let selection = config.selection_config();

    // A corpus where no document reaches the stats builder still needs its
    // posts classified for the counts; an empty idf table makes every
    // specificity check fail, which is the right degenerate outcome.
    let stats = stats.unwrap_or(VocabularyStats {
        n_docs: 1,
        df: BTreeMap::new(),
        idf: BTreeMap::new(),
        ngram_max: NgramMax::Unigrams,
        min_df: u32::MAX,
    });

    let mut no_body = 0usize;
    let mut no_questions = 0usize;
    let mut length_fail = 0usize;
    let mut no_specific = 0usize;
    let mut records: Vec<NarrativeRecord> = Vec::new();
    for post in &posts {
        let mut rng = substream_rng(config.seed, "extract", &post.id);
        match extract_post(post, &stats, bounds, selection, &mut rng) {
            ExtractOutcome::NoBody => no_body += 1,
            ExtractOutcome::NoQuestions => no_questions += 1,
            ExtractOutcome::LengthFail(_) => length_fail += 1,
            ExtractOutcome::NoSpecificQuestion(_) => no_specific += 1,
            ExtractOutcome::Kept(record) => records.push(*record),
        }
    }

    let with_body = posts.len() - no_body;
    let with_questions = with_body - no_questions;
    let length_ok = with_questions - length_fail;
    debug_assert_eq!(length_ok - no_specific, records.len());
    write_jsonl(&config.artifact(NARRATIVES_FILE), &records)?;
    update_counts(
        config,
        "extract",
        vec![
            metric("posts_in", posts.len()),
            metric("with_body", with_body),
            metric("with_questions", with_questions),
            metric("after_length_filter", length_ok),
            metric("with_specific_question", records.len()),
        ],
    )?;
    println!(
        "extract: {} narratives with ground-truth questions (of {} posts)",
        records.len(),
        posts.len()
    );
    Ok(())
}

// --- pair -------------------------------------------------------------------

fn pairing_stats(
    records: &[NarrativeRecord],
    config: &PipelineConfig,
) -> Result<VocabularyStats, StageError> {
    let docs: Vec<TokenizedDoc> = records.iter().map(NarrativeRecord::tokenized).collect();
    build_vocab_stats(
        docs.iter(),
        config.ngram_max().expect("validated"),
        config.thresholds.min_df,
    )
    .map_err(|e| StageError::failure(format!("vocabulary stats: {e}")))
}

fn tfidf_rows(
    records: &[NarrativeRecord],
    stats: &VocabularyStats,
) -> Vec<(String, SparseVector)> {
    records
        .par_iter()
        .map(|record| {
            let doc = record.tokenized();
            (record.post_id.clone(), tfidf_vector(&doc, stats))
        })
        .collect()
}

pub fn run_pair(config: &PipelineConfig) -> Result<(), StageError> {
    let narratives_path = require_artifact(config, NARRATIVES_FILE, "extract")?;
    let records: Vec<NarrativeRecord> = read_jsonl(&narratives_path)?;

    let (candidates, pairs) = if records.len() < 2 {
        (Vec::new(), Vec::new())
    } else {
        let stats = pairing_stats(&records, config)?;
        let rows = tfidf_rows(&records, &stats);
        let candidates =
            build_pair_candidates(&rows, config.pair_bounds(), config.neighbor_search());
        let matched = greedy_pair(&candidates);
        let similarity: BTreeMap<(String, String), f64> = candidates
            .iter()
            .map(|c| ((c.id_a.clone(), c.id_b.clone()), c.similarity))
            .collect();
        let pairs: Vec<PairCandidate> = matched
            .into_iter()
            .map(|(id_a, id_b)| {
                let sim = similarity[&(id_a.clone(), id_b.clone())];
                PairCandidate {
                    id_a,
                    id_b,
                    similarity: sim,
                }
            })
            .collect();
        (candidates, pairs)
    };

    write_jsonl(&config.artifact(PAIRS_FILE), &pairs)?;
    update_counts(
        config,
        "pair",
        vec![
            metric("pair_candidates", candidates.len()),
            metric("pairs", pairs.len()),
            metric("paired_narratives", pairs.len() * 2),
        ],
    )?;
    println!(
        "pair: {} pairs from {} candidates over {} narratives",
        pairs.len(),
        candidates.len(),
        records.len()
    );
    Ok(())
}

// --- build ------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct DiscardedNarrative {
    pub instance_id: String,
    pub discarded_post_id: String,
}

pub fn run_build(config: &PipelineConfig) -> Result<(), StageError> {
    let narratives_path = require_artifact(config, NARRATIVES_FILE, "extract")?;
    let pairs_path = require_artifact(config, PAIRS_FILE, "pair")?;
    let records: Vec<NarrativeRecord> = read_jsonl(&narratives_path)?;
    let pairs: Vec<PairCandidate> = read_jsonl(&pairs_path)?;
    if pairs.is_empty() {
        write_jsonl::<ClozeInstance>(&config.artifact(INSTANCES_FILE), &[])?;
        write_jsonl::<DiscardedNarrative>(&config.artifact(DISCARDED_FILE), &[])?;
        update_counts(
            config,
            "build",
            vec![
                metric("pairs_in", 0),
                metric("question_pair_too_similar", 0),
                metric("question_pair_too_dissimilar", 0),
                metric("missing_sentence_vector", 0),
                metric("instances", 0),
            ],
        )?;
        println!("build: no pairs to assemble");
        return Ok(());
    }
    let embeddings_path = require_config_path(&config.paths.embeddings, "embeddings")?;
    let table = EmbeddingTable::load(embeddings_path)
        .map_err(|e| StageError::failure(format!("build: {e}")))?;

    let stats = pairing_stats(&records, config)?;
    let by_id: BTreeMap<&str, &NarrativeRecord> =
        records.iter().map(|r| (r.post_id.as_str(), r)).collect();

    let store = match &config.paths.sentence_vectors {
        Some(_) => {
            let path = require_config_path(&config.paths.sentence_vectors, "sentence_vectors")?;
            SentenceVectorStore::load(path)
                .map_err(|e| StageError::failure(format!("build: {e}")))?
        }
        None => {
            let questions: Vec<(String, TokenizedDoc)> = records
                .iter()
                .map(|r| (r.post_id.clone(), r.tokenized_question()))
                .collect();
            SentenceVectorStore::compose(&questions, &table, &stats)
                .map_err(|e| StageError::failure(format!("build: {e}")))?
        }
    };

    let question_bounds = config.question_bounds();
    let mut instances: Vec<ClozeInstance> = Vec::new();
    let mut discarded: Vec<DiscardedNarrative> = Vec::new();
    let mut too_similar = 0usize;
    let mut too_dissimilar = 0usize;
    let mut missing_vector = 0usize;
    for pair in &pairs {
        let (Some(n1), Some(n2)) = (by_id.get(pair.id_a.as_str()), by_id.get(pair.id_b.as_str()))
        else {
            return Err(StageError::failure(format!(
                "build: pair {}__{} references unknown narratives",
                pair.id_a, pair.id_b
            )));
        };
        let verdict = match filter_question_pair(&pair.id_a, &pair.id_b, &store, question_bounds) {
            Ok(v) => v,
            Err(PairingError::MissingSentenceVector { id }) => {
                eprintln!("build: no sentence vector for {id}; pair discarded");
                missing_vector += 1;
                continue;
            }
            Err(e) => return Err(StageError::failure(format!("build: {e}"))),
        };
        let (keep, question_similarity) = verdict;
        if !keep {
            if question_similarity > question_bounds.upper {
                too_similar += 1;
            } else {
                too_dissimilar += 1;
            }
            continue;
        }
        let (choice, diagnostics) = choose_masked_narrative(
            &n1.tokenized(),
            &n2.tokenized(),
            &n1.tokenized_question(),
            &n2.tokenized_question(),
            &table,
            &stats,
        )
        .map_err(|e| StageError::failure(format!("build: {e}")))?;
        let narrative_pair = NarrativePair {
            n1,
            n2,
            similarity: pair.similarity,
        };
        let id = instance_id(&pair.id_a, &pair.id_b);
        let mut rng = substream_rng(config.seed, "assemble", &id);
        let instance = assemble_instance(
            &narrative_pair,
            choice,
            diagnostics.chosen_min,
            question_similarity,
            &mut rng,
        );
        discarded.push(DiscardedNarrative {
            instance_id: instance.instance_id.clone(),
            discarded_post_id: instance.alternative_post_id.clone(),
        });
        instances.push(instance);
    }

    write_jsonl(&config.artifact(INSTANCES_FILE), &instances)?;
    write_jsonl(&config.artifact(DISCARDED_FILE), &discarded)?;
    update_counts(
        config,
        "build",
        vec![
            metric("pairs_in", pairs.len()),
            metric("question_pair_too_similar", too_similar),
            metric("question_pair_too_dissimilar", too_dissimilar),
            metric("missing_sentence_vector", missing_vector),
            metric("instances", instances.len()),
        ],
    )?;
    println!(
        "build: {} instances ({} pairs in, {} discarded by the question window, {} missing vectors)",
        instances.len(),
        pairs.len(),
        too_similar + too_dissimilar,
        missing_vector
    );
    Ok(())
}

// --- diversity ----------------------------------------------------------------

pub fn run_diversity(config: &PipelineConfig) -> Result<(), StageError> {
    let narratives_path = require_artifact(config, NARRATIVES_FILE, "extract")?;
    let records: Vec<NarrativeRecord> = read_jsonl(&narratives_path)?;
    if records.len() < 2 {
        return Err(StageError::failure(
            "diversity: need at least 2 narratives".to_string(),
        ));
    }
    let stats = pairing_stats(&records, config)?;
    let rows = tfidf_rows(&records, &stats);

    let max_dims = records.len().min(stats.vocab_size());
    let dims = config.diversity.dims.min(max_dims);
    if dims < config.diversity.dims {
        eprintln!(
            "diversity: dims clamped from {} to {dims} (corpus limit)",
            config.diversity.dims
        );
    }
    let options = SvdOptions {
        seed: substream_seed(config.seed, "diversity", "svd"),
        ..SvdOptions::default()
    };
    let projected = project_corpus(&rows, dims, &options)
        .map_err(|e| StageError::failure(format!("diversity: {e}")))?;

    let k = config.diversity.k.min(records.len());
    if k < config.diversity.k {
        eprintln!(
            "diversity: k clamped from {} to {k} (corpus limit)",
            config.diversity.k
        );
    }
    let clustering = cluster_topics(
        &projected.matrix,
        k,
        substream_seed(config.seed, "diversity", "kmeans"),
        config.diversity.max_iter,
    )
    .map_err(|e| StageError::failure(format!("diversity: {e}")))?;

    let question_docs: Vec<TokenizedDoc> =
        records.iter().map(NarrativeRecord::tokenized_question).collect();
    let question_stats = build_vocab_stats(question_docs.iter(), NgramMax::Unigrams, 1)
        .map_err(|e| StageError::failure(format!("diversity: {e}")))?;

    let mut out = String::from("cluster_id,size,keywords,example_question\n");
    for cluster in 0..k {
        let member_indices: Vec<usize> = clustering
            .assignments
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect();
        let cluster_questions: Vec<&TokenizedDoc> =
            member_indices.iter().map(|&i| &question_docs[i]).collect();
        let filter: Option<&dyn Fn(&str) -> bool> = match config.diversity.pos_filter {
            PosFilter::All => None,
            PosFilter::NounVerb => Some(&noun_verb_heuristic),
        };
        let keywords = topic_keywords(
            &cluster_questions,
            &question_stats,
            filter,
            config.diversity.top_keywords,
        );
        let keyword_list: Vec<&str> = keywords.iter().map(|(w, _)| w.as_str()).collect();
        let example = member_indices
            .first()
            .map(|&i| records[i].ground_truth_question.replace(',', ";"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{cluster},{},{},{}\n",
            member_indices.len(),
            keyword_list.join(" "),
            example
        ));
    }
    write_atomic(&config.artifact(DIVERSITY_FILE), out.as_bytes())?;
    update_counts(
        config,
        "diversity",
        vec![metric("clusters", k), metric("projection_dims", dims)],
    )?;
    println!(
        "diversity: {k} clusters over {} narratives in {dims} dimensions (wcss {:.4})",
        records.len(),
        clustering.wcss_trace.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

// --- train / evaluate ----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub model: ChoiceModel,
    pub final_loss: f64,
    pub epochs: usize,
    pub rate_halvings: usize,
    pub train_accuracy: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalArtifact {
    pub train: Option<Accuracy>,
    pub test: Option<Accuracy>,
    pub heldout: Option<Accuracy>,
    /// Which split the concreteness analysis ran on.
    pub concreteness_split: Option<String>,
    pub concreteness: Option<ConcretenessReport>,
}

/// Feature stats are built over every instance narrative in the file, so
/// train and evaluate agree on the representation.
pub fn feature_stats(
    instances: &[ClozeInstance],
    config: &PipelineConfig,
) -> Result<VocabularyStats, StageError> {
    let docs: Vec<TokenizedDoc> = instances
        .iter()
        .map(|i| TokenizedDoc::new(i.instance_id.clone(), &i.narrative))
        .collect();
    build_vocab_stats(
        docs.iter(),
        config.ngram_max().expect("validated"),
        config.thresholds.min_df,
    )
    .map_err(|e| StageError::failure(format!("feature stats: {e}")))
}

pub fn featurize(
    instances: &[ClozeInstance],
    stats: &VocabularyStats,
    table: &EmbeddingTable,
) -> Result<Vec<LabeledFeatures>, StageError> {
    let context = FeatureContext::new(stats, table);
    instances
        .par_iter()
        .map(|instance| {
            let narrative = TokenizedDoc::new(instance.instance_id.clone(), &instance.narrative);
            let question_a = TokenizedDoc::new("qa", &instance.question_a);
            let question_b = TokenizedDoc::new("qb", &instance.question_b);
            let features_a = context
                .extract(&narrative, &question_a)
                .map_err(|e| StageError::failure(format!("features: {e}")))?;
            let features_b = context
                .extract(&narrative, &question_b)
                .map_err(|e| StageError::failure(format!("features: {e}")))?;
            Ok(LabeledFeatures {
                features_a,
                features_b,
                label: instance.label,
            })
        })
        .collect()
}

/// Split instances into (train, test, heldout) index sets with the shared
/// "split" random substream.
pub fn split_indices(
    n: usize,
    config: &PipelineConfig,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), StageError> {
    let indices: Vec<usize> = (0..n).collect();
    let sizes = (config.split.train, config.split.test, config.split.heldout);
    split_dataset(&indices, sizes, substream_seed(config.seed, "split", ""))
        .map_err(|e| StageError::Config(format!("split: {e}")))
}

pub fn run_train(config: &PipelineConfig) -> Result<(), StageError> {
    let instances_path = require_artifact(config, INSTANCES_FILE, "build")?;
    let instances: Vec<ClozeInstance> = read_jsonl(&instances_path)?;
    let embeddings_path = require_config_path(&config.paths.embeddings, "embeddings")?;
    let table = EmbeddingTable::load(embeddings_path)
        .map_err(|e| StageError::failure(format!("train: {e}")))?;
    if config.split.train == 0 {
        return Err(StageError::Config(
            "split.train must be positive to train".to_string(),
        ));
    }

    let stats = feature_stats(&instances, config)?;
    let features = featurize(&instances, &stats, &table)?;
    let (train_idx, _, _) = split_indices(instances.len(), config)?;
    let train_set: Vec<LabeledFeatures> = train_idx.iter().map(|&i| features[i]).collect();

    let outcome = train_choice_model(&train_set, config.training_meta())
        .map_err(|e| StageError::failure(format!("train: {e}")))?;
    let train_accuracy = evaluate(&train_set, &outcome.model)
        .map_err(|e| StageError::failure(format!("train: {e}")))?;

    let artifact = ModelArtifact {
        model: outcome.model,
        final_loss: outcome.final_loss,
        epochs: outcome.loss_trace.len().saturating_sub(1),
        rate_halvings: outcome.rate_halvings,
        train_accuracy: train_accuracy.accuracy,
    };
    let body = serde_json::to_string_pretty(&artifact)
        .map_err(|e| StageError::failure(format!("train: {e}")))?;
    write_atomic(&config.artifact(MODEL_FILE), body.as_bytes())?;
    update_counts(
        config,
        "train",
        vec![
            metric("train_instances", train_set.len()),
            metric("epochs", artifact.epochs),
        ],
    )?;
    println!(
        "train: {} instances, final loss {:.4}, train accuracy {:.3}",
        train_set.len(),
        artifact.final_loss,
        artifact.train_accuracy
    );
    Ok(())
}

pub fn run_evaluate(config: &PipelineConfig) -> Result<(), StageError> {
    let instances_path = require_artifact(config, INSTANCES_FILE, "build")?;
    let model_path = require_artifact(config, MODEL_FILE, "train")?;
    let instances: Vec<ClozeInstance> = read_jsonl(&instances_path)?;
    let embeddings_path = require_config_path(&config.paths.embeddings, "embeddings")?;
    let table = EmbeddingTable::load(embeddings_path)
        .map_err(|e| StageError::failure(format!("evaluate: {e}")))?;
    let model_file = std::fs::read_to_string(&model_path)
        .map_err(|e| StageError::failure(format!("evaluate: {e}")))?;
    let artifact: ModelArtifact = serde_json::from_str(&model_file)
        .map_err(|e| StageError::failure(format!("evaluate: bad model file: {e}")))?;
    let model = artifact.model;

    let stats = feature_stats(&instances, config)?;
    let features = featurize(&instances, &stats, &table)?;
    let (train_idx, test_idx, heldout_idx) = split_indices(instances.len(), config)?;

    let eval_slice = |idx: &[usize]| -> Result<Option<Accuracy>, StageError> {
        if idx.is_empty() {
            return Ok(None);
        }
        let subset: Vec<LabeledFeatures> = idx.iter().map(|&i| features[i]).collect();
        evaluate(&subset, &model)
            .map(Some)
            .map_err(|e| StageError::failure(format!("evaluate: {e}")))
    };
    let train_accuracy = eval_slice(&train_idx)?;
    let test_accuracy = eval_slice(&test_idx)?;
    let heldout_accuracy = eval_slice(&heldout_idx)?;

    // Per-instance predictions, in instance file order.
    let mut split_of = vec!["unassigned"; instances.len()];
    for &i in &train_idx {
        split_of[i] = "train";
    }
    for &i in &test_idx {
        split_of[i] = "test";
    }
    for &i in &heldout_idx {
        split_of[i] = "heldout";
    }
    let mut predictions_csv =
        String::from("instance_id,split,probability_a,predicted,label,correct\n");
    let mut predicted_slots: Vec<Slot> = Vec::with_capacity(instances.len());
    for (index, (instance, feature)) in instances.iter().zip(&features).enumerate() {
        let p = advice_cloze::eval::score_difference(&model, &feature.features_a, &feature.features_b);
        let (slot, _) = advice_cloze::eval::predict(&model, &feature.features_a, &feature.features_b);
        predicted_slots.push(slot);
        let fmt_slot = |s: Slot| if s == Slot::A { "a" } else { "b" };
        predictions_csv.push_str(&format!(
            "{},{},{:.6},{},{},{}\n",
            instance.instance_id,
            split_of[index],
            p,
            fmt_slot(slot),
            fmt_slot(instance.label),
            slot == instance.label
        ));
    }

    // Concreteness analysis over the held-out split (test when no held-out
    // instances exist).
    let (concreteness_split, analysis_idx): (Option<String>, &[usize]) =
        if !heldout_idx.is_empty() {
            (Some("heldout".to_string()), &heldout_idx)
        } else if !test_idx.is_empty() {
            (Some("test".to_string()), &test_idx)
        } else {
            (None, &[])
        };
    let concreteness = if analysis_idx.is_empty() {
        None
    } else {
        let items: Vec<ConcretenessItem> = analysis_idx
            .iter()
            .map(|&i| {
                let instance = &instances[i];
                let tokens = advice_cloze::text::tokenize(instance.actual_question());
                ConcretenessItem {
                    mean_idf: question_mean_idf(&tokens, &stats),
                    leading_word: tokens.first().cloned().unwrap_or_default(),
                    correct: predicted_slots[i] == instance.label,
                }
            })
            .collect();
        concreteness_analysis(&items)
    };

    let eval_artifact = EvalArtifact {
        train: train_accuracy,
        test: test_accuracy,
        heldout: heldout_accuracy,
        concreteness_split: if concreteness.is_some() {
            concreteness_split
        } else {
            None
        },
        concreteness,
    };
    let body = serde_json::to_string_pretty(&eval_artifact)
        .map_err(|e| StageError::failure(format!("evaluate: {e}")))?;
    write_atomic(&config.artifact(EVAL_JSON_FILE), body.as_bytes())?;
    write_atomic(&config.artifact(PREDICTIONS_FILE), predictions_csv.as_bytes())?;

    let mut eval_csv = String::from("split,n,correct,ties,accuracy\n");
    for (name, accuracy) in [
        ("train", &eval_artifact.train),
        ("test", &eval_artifact.test),
        ("heldout", &eval_artifact.heldout),
    ] {
        if let Some(a) = accuracy {
            eval_csv.push_str(&format!(
                "{},{},{},{},{:.6}\n",
                name, a.n, a.correct, a.ties, a.accuracy
            ));
        }
    }
    write_atomic(&config.artifact(EVAL_CSV_FILE), eval_csv.as_bytes())?;

    update_counts(
        config,
        "evaluate",
        vec![
            metric("test_instances", test_idx.len()),
            metric("heldout_instances", heldout_idx.len()),
        ],
    )?;
    let show = |accuracy: &Option<Accuracy>| {
        accuracy
            .as_ref()
            .map(|a| format!("{:.3} (n={})", a.accuracy, a.n))
            .unwrap_or_else(|| "n/a".to_string())
    };
    println!(
        "evaluate: test {} heldout {}",
        show(&eval_artifact.test),
        show(&eval_artifact.heldout)
    );
    Ok(())
}
