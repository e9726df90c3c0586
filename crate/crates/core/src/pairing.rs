//! Narrative pairing and cloze instance assembly.
//!
//! Similar narratives are paired by tf-idf cosine (greedy maximal matching
//! over bounded-similarity candidates), one narrative of each pair is chosen
//! as the cloze text by the argmax-min question-narrative similarity rule,
//! and the pair's two ground-truth questions become the instance's answer
//! options.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloze::NarrativeRecord;
use crate::text::{
    embed_doc, DenseVector, EmbedMode, EmbeddingTable, SparseVector, TextError, TokenizedDoc,
    VocabularyStats,
};

/// Similarity window for narrative pairs: above `upper` is a likely
/// duplicate, below `lower` the narratives are too unrelated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for PairBounds {
    fn default() -> Self {
        Self {
            lower: 0.1,
            upper: 0.8,
        }
    }
}

/// How neighbor candidates are gathered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborSearch {
    /// All-pairs cosine; exact, for small corpora and oracle tests.
    Exact,
    /// Inverted-index accumulation keeping the top-k neighbors per narrative.
    TopK(usize),
}

/// A candidate narrative pair in canonical id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCandidate {
    pub id_a: String,
    pub id_b: String,
    pub similarity: f64,
}

impl PairCandidate {
    /// Build with ids swapped into canonical (`id_a < id_b`) order.
    pub fn canonical(x: impl Into<String>, y: impl Into<String>, similarity: f64) -> Self {
        let (x, y) = (x.into(), y.into());
        let (id_a, id_b) = if x <= y { (x, y) } else { (y, x) };
        Self {
            id_a,
            id_b,
            similarity,
        }
    }
}

/// Collect bounded-similarity pair candidates over unit-norm tf-idf rows.
///
/// In `TopK` mode each narrative contributes its k most similar neighbors
/// (found by accumulating postings of an inverted term index), the union is
/// deduplicated, and only then is the similarity window applied — a
/// duplicate-looking neighbor occupies a top-k slot even though the window
/// later drops it.
pub fn build_pair_candidates(
    docs: &[(String, SparseVector)],
    bounds: PairBounds,
    search: NeighborSearch,
) -> Vec<PairCandidate> {
    if docs.len() < 2 {
        return Vec::new();
    }
    match search {
        NeighborSearch::Exact => {
            let mut out = Vec::new();
            for i in 0..docs.len() {
                for j in (i + 1)..docs.len() {
                    let sim = docs[i].1.cosine(&docs[j].1);
                    if sim >= bounds.lower && sim <= bounds.upper {
                        out.push(PairCandidate::canonical(
                            docs[i].0.clone(),
                            docs[j].0.clone(),
                            sim,
                        ));
                    }
                }
            }
            out.sort_by(|a, b| {
                (a.id_a.as_str(), a.id_b.as_str()).cmp(&(b.id_a.as_str(), b.id_b.as_str()))
            });
            out
        }
        NeighborSearch::TopK(top_k) => top_k_candidates(docs, bounds, top_k),
    }
}

fn top_k_candidates(
    docs: &[(String, SparseVector)],
    bounds: PairBounds,
    top_k: usize,
) -> Vec<PairCandidate> {
    // term -> [(doc index, weight)]
    let mut postings: HashMap<&str, Vec<(usize, f64)>> = HashMap::new();
    for (index, (_, vector)) in docs.iter().enumerate() {
        for (term, weight) in &vector.entries {
            postings
                .entry(term.as_str())
                .or_default()
                .push((index, *weight));
        }
    }

    // Per-doc accumulation with a generation-stamped score buffer, so the
    // buffer is reused without clearing all n slots for every narrative.
    let neighbor_lists: Vec<Vec<(usize, f64)>> = docs
        .par_iter()
        .enumerate()
        .map_init(
            || (vec![0.0f64; docs.len()], vec![usize::MAX; docs.len()]),
            |(scores, stamps), (i, (_, vector))| {
                let mut touched: Vec<usize> = Vec::new();
                for (term, weight) in &vector.entries {
                    if let Some(list) = postings.get(term.as_str()) {
                        for &(j, w) in list {
                            if j == i {
                                continue;
                            }
                            if stamps[j] != i {
                                stamps[j] = i;
                                scores[j] = 0.0;
                                touched.push(j);
                            }
                            scores[j] += weight * w;
                        }
                    }
                }
                let mut neighbors: Vec<(usize, f64)> =
                    touched.into_iter().map(|j| (j, scores[j])).collect();
                neighbors.sort_by(|(ja, sa), (jb, sb)| {
                    sb.total_cmp(sa).then_with(|| docs[*ja].0.cmp(&docs[*jb].0))
                });
                neighbors.truncate(top_k);
                neighbors
            },
        )
        .collect();

    // Union in doc order; the first writer of a pair wins, which keeps the
    // stored similarity value deterministic.
    let mut seen: BTreeMap<(String, String), f64> = BTreeMap::new();
    for (i, neighbors) in neighbor_lists.iter().enumerate() {
        for &(j, sim) in neighbors {
            let key = if docs[i].0 <= docs[j].0 {
                (docs[i].0.clone(), docs[j].0.clone())
            } else {
                (docs[j].0.clone(), docs[i].0.clone())
            };
            seen.entry(key).or_insert(sim);
        }
    }
    seen.into_iter()
        .filter(|(_, sim)| *sim >= bounds.lower && *sim <= bounds.upper)
        .map(|((id_a, id_b), similarity)| PairCandidate {
            id_a,
            id_b,
            similarity: similarity.clamp(-1.0, 1.0),
        })
        .collect()
}

/// Greedy maximal matching: process candidates in descending similarity
/// (ties broken by canonical id order) and accept a pair iff neither
/// narrative is already used.
pub fn greedy_pair(candidates: &[PairCandidate]) -> Vec<(String, String)> {
    let mut ordered: Vec<&PairCandidate> = candidates.iter().collect();
    ordered.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.id_a.cmp(&b.id_a))
            .then_with(|| a.id_b.cmp(&b.id_b))
    });
    let mut used: HashSet<&str> = HashSet::new();
    let mut pairs = Vec::new();
    for candidate in ordered {
        if used.contains(candidate.id_a.as_str()) || used.contains(candidate.id_b.as_str()) {
            continue;
        }
        used.insert(&candidate.id_a);
        used.insert(&candidate.id_b);
        pairs.push((candidate.id_a.clone(), candidate.id_b.clone()));
    }
    pairs
}

/// Which narrative of a pair becomes the cloze text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskChoice {
    First,
    Second,
}

/// The argmax-min rule on raw similarities: pick the narrative whose weaker
/// question-narrative similarity is larger; ties go to the first.
pub fn choose_by_similarities(n1_q1: f64, n1_q2: f64, n2_q1: f64, n2_q2: f64) -> MaskChoice {
    let min1 = n1_q1.min(n1_q2);
    let min2 = n2_q1.min(n2_q2);
    if min2 > min1 {
        MaskChoice::Second
    } else {
        MaskChoice::First
    }
}

/// Similarities feeding the masking decision, kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskDiagnostics {
    pub n1_q1: f64,
    pub n1_q2: f64,
    pub n2_q1: f64,
    pub n2_q2: f64,
    /// min over both questions for the chosen narrative.
    pub chosen_min: f64,
}

/// Apply the argmax-min rule with narratives and questions represented as
/// tf-idf weighted word embeddings.
pub fn choose_masked_narrative(
    n1: &TokenizedDoc,
    n2: &TokenizedDoc,
    q1: &TokenizedDoc,
    q2: &TokenizedDoc,
    table: &EmbeddingTable,
    stats: &VocabularyStats,
) -> Result<(MaskChoice, MaskDiagnostics), TextError> {
    let embed = |doc: &TokenizedDoc| embed_doc(doc, table, Some(stats), EmbedMode::TfidfWeighted);
    let (v_n1, v_n2, v_q1, v_q2) = (embed(n1)?, embed(n2)?, embed(q1)?, embed(q2)?);
    let sims = MaskDiagnostics {
        n1_q1: v_n1.cosine(&v_q1)?,
        n1_q2: v_n1.cosine(&v_q2)?,
        n2_q1: v_n2.cosine(&v_q1)?,
        n2_q2: v_n2.cosine(&v_q2)?,
        chosen_min: 0.0,
    };
    let choice = choose_by_similarities(sims.n1_q1, sims.n1_q2, sims.n2_q1, sims.n2_q2);
    let chosen_min = match choice {
        MaskChoice::First => sims.n1_q1.min(sims.n1_q2),
        MaskChoice::Second => sims.n2_q1.min(sims.n2_q2),
    };
    Ok((choice, MaskDiagnostics { chosen_min, ..sims }))
}

/// Unit-norm sentence vectors for questions, keyed by the narrative's post id.
#[derive(Debug, Clone)]
pub struct SentenceVectorStore {
    pub dim: usize,
    vectors: HashMap<String, DenseVector>,
}

impl SentenceVectorStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DenseVector> {
        self.vectors.get(id)
    }

    /// Insert after L2 normalization; zero vectors are rejected since they
    /// carry no direction to compare. First occurrence of an id wins.
    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<(), PairingError> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(PairingError::VectorDimension {
                id,
                expected: self.dim,
                found: vector.len(),
            });
        }
        let mut dense = DenseVector(vector);
        if dense.norm() == 0.0 || !dense.norm().is_finite() {
            return Err(PairingError::UnnormalizableVector { id });
        }
        dense.normalize();
        self.vectors.entry(id).or_insert(dense);
        Ok(())
    }

    /// Load `id v1 ... vd` lines; vectors are L2-normalized on load.
    pub fn load(path: &Path) -> Result<Self, PairingError> {
        let file = File::open(path).map_err(|source| PairingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut store: Option<SentenceVectorStore> = None;
        for (index, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| PairingError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let id = fields.next().expect("non-empty line has a first field");
            let values = fields
                .map(|v| {
                    v.parse::<f64>().map_err(|e| PairingError::VectorParse {
                        line: index + 1,
                        reason: e.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if values.is_empty() {
                return Err(PairingError::VectorParse {
                    line: index + 1,
                    reason: "no vector components".to_string(),
                });
            }
            let store = store.get_or_insert_with(|| SentenceVectorStore::new(values.len()));
            store.insert(id, values)?;
        }
        store.ok_or(PairingError::EmptyVectorFile)
    }

    /// Fallback when no external sentence vectors are supplied: compose each
    /// question as a tf-idf weighted average of word vectors. Questions that
    /// compose to the zero vector are left out and later counted as missing.
    pub fn compose(
        questions: &[(String, TokenizedDoc)],
        table: &EmbeddingTable,
        stats: &VocabularyStats,
    ) -> Result<Self, TextError> {
        let mut store = SentenceVectorStore::new(table.dim);
        for (id, doc) in questions {
            let vector = embed_doc(doc, table, Some(stats), EmbedMode::TfidfWeighted)?;
            if !vector.is_zero() {
                store
                    .insert(id.clone(), vector.0)
                    .expect("non-zero vector of table dimension");
            }
        }
        Ok(store)
    }

    pub fn cosine(&self, id_a: &str, id_b: &str) -> Result<f64, PairingError> {
        let a = self
            .get(id_a)
            .ok_or_else(|| PairingError::MissingSentenceVector { id: id_a.to_string() })?;
        let b = self
            .get(id_b)
            .ok_or_else(|| PairingError::MissingSentenceVector { id: id_b.to_string() })?;
        a.cosine(b).map_err(PairingError::Text)
    }
}

/// Surface-similarity window for the two questions of an instance: above
/// `upper` they are indistinguishable, below `lower` the pairing is poor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuestionBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for QuestionBounds {
    fn default() -> Self {
        Self {
            lower: 0.8,
            upper: 0.95,
        }
    }
}

/// Keep the instance iff the questions' sentence-vector cosine lies inside
/// the window. Returns the similarity alongside the verdict; a missing
/// vector is an error so callers can count it separately.
pub fn filter_question_pair(
    q1_id: &str,
    q2_id: &str,
    store: &SentenceVectorStore,
    bounds: QuestionBounds,
) -> Result<(bool, f64), PairingError> {
    let sim = store.cosine(q1_id, q2_id)?;
    Ok((sim >= bounds.lower && sim <= bounds.upper, sim))
}

/// Presentation slot of a question within an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    A,
    B,
}

/// A matched pair of narratives with their ground-truth questions.
#[derive(Debug, Clone, Copy)]
pub struct NarrativePair<'a> {
    pub n1: &'a NarrativeRecord,
    pub n2: &'a NarrativeRecord,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceDiagnostics {
    pub pair_similarity: f64,
    pub min_question_narrative_similarity: f64,
    pub question_pair_similarity: f64,
}

/// A finished test instance: one masked narrative and two candidate
/// questions in randomized presentation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClozeInstance {
    pub instance_id: String,
    pub narrative: String,
    pub question_a: String,
    pub question_b: String,
    /// The slot holding the question actually asked by the narrator.
    pub label: Slot,
    pub source_post_id: String,
    pub alternative_post_id: String,
    pub diagnostics: InstanceDiagnostics,
}

impl ClozeInstance {
    pub fn actual_question(&self) -> &str {
        match self.label {
            Slot::A => &self.question_a,
            Slot::B => &self.question_b,
        }
    }

    pub fn alternative_question(&self) -> &str {
        match self.label {
            Slot::A => &self.question_b,
            Slot::B => &self.question_a,
        }
    }
}

/// Instance ids are the canonical pair ids joined by `__`.
pub fn instance_id(id_a: &str, id_b: &str) -> String {
    if id_a <= id_b {
        format!("{id_a}__{id_b}")
    } else {
        format!("{id_b}__{id_a}")
    }
}

/// Place the two questions into presentation slots by a fair coin and record
/// which slot holds the actual question.
pub fn assemble_instance<R: Rng>(
    pair: &NarrativePair<'_>,
    chosen: MaskChoice,
    chosen_min_similarity: f64,
    question_pair_similarity: f64,
    rng: &mut R,
) -> ClozeInstance {
    let (source, alternative) = match chosen {
        MaskChoice::First => (pair.n1, pair.n2),
        MaskChoice::Second => (pair.n2, pair.n1),
    };
    let actual_in_a = rng.random_bool(0.5);
    let (question_a, question_b, label) = if actual_in_a {
        (
            source.ground_truth_question.clone(),
            alternative.ground_truth_question.clone(),
            Slot::A,
        )
    } else {
        (
            alternative.ground_truth_question.clone(),
            source.ground_truth_question.clone(),
            Slot::B,
        )
    };
    ClozeInstance {
        instance_id: instance_id(&pair.n1.post_id, &pair.n2.post_id),
        narrative: source.masked_text.clone(),
        question_a,
        question_b,
        label,
        source_post_id: source.post_id.clone(),
        alternative_post_id: alternative.post_id.clone(),
        diagnostics: InstanceDiagnostics {
            pair_similarity: pair.similarity,
            min_question_narrative_similarity: chosen_min_similarity,
            question_pair_similarity,
        },
    }
}

#[derive(Debug, Error)]
pub enum PairingError {
    #[error("no sentence vector for question {id}")]
    MissingSentenceVector { id: String },

    #[error("sentence vector for {id} has dimension {found}, expected {expected}")]
    VectorDimension {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("sentence vector for {id} has zero or non-finite norm")]
    UnnormalizableVector { id: String },

    #[error("sentence vector file line {line}: {reason}")]
    VectorParse { line: usize, reason: String },

    #[error("sentence vector file has no data lines")]
    EmptyVectorFile,

    #[error(transparent)]
    Text(#[from] TextError),

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
