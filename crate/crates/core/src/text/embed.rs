//! Pre-trained word vectors and document embedding composition.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::token::TokenizedDoc;
use super::vocab::VocabularyStats;
use super::TextError;

/// A fixed-length dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseVector(pub Vec<f64>);

impl DenseVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Scale to unit length in place; a zero vector is left unchanged.
    pub fn normalize(&mut self) {
        let norm = self.norm();
        if norm > 0.0 {
            for c in &mut self.0 {
                *c /= norm;
            }
        }
    }

    /// Cosine similarity; 0 when either norm is 0, clamped to [-1, 1].
    pub fn cosine(&self, other: &DenseVector) -> Result<f64, TextError> {
        if self.dim() != other.dim() {
            return Err(TextError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return Ok(0.0);
        }
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        Ok((dot / denom).clamp(-1.0, 1.0))
    }
}

/// Word-to-vector lookup table loaded from a text file.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    /// Insert a vector; the first occurrence of a token wins.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<(), TextError> {
        if vector.len() != self.dim {
            return Err(TextError::DimensionMismatch {
                left: self.dim,
                right: vector.len(),
            });
        }
        if vector.iter().any(|c| !c.is_finite()) {
            return Err(TextError::NonFiniteComponent);
        }
        self.vectors.entry(token.into()).or_insert(vector);
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Load from `token v1 v2 ... vd` lines. The dimension is inferred from
    /// the first data line; an optional leading `count dim` header line is
    /// detected and skipped. Duplicate tokens keep their first occurrence.
    pub fn load(path: &Path) -> Result<Self, TextError> {
        let file = File::open(path).map_err(|source| TextError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let reader = BufReader::new(file);
        let mut table: Option<EmbeddingTable> = None;
        for (index, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| TextError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line has a first field");
            let values: Vec<&str> = fields.collect();
            if table.is_none() {
                // A two-field line "count dim" where both parse as integers
                // is a header, not a one-dimensional vector.
                if values.len() == 1
                    && token.parse::<u64>().is_ok()
                    && values[0].parse::<u64>().is_ok()
                {
                    continue;
                }
                if values.is_empty() {
                    return Err(TextError::EmbeddingParse {
                        line: index + 1,
                        reason: "no vector components".to_string(),
                    });
                }
                table = Some(EmbeddingTable::new(values.len()));
            }
            let table = table.as_mut().expect("set above");
            let vector = values
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| TextError::EmbeddingParse {
                    line: index + 1,
                    reason: e.to_string(),
                })?;
            if vector.len() != table.dim {
                return Err(TextError::EmbeddingParse {
                    line: index + 1,
                    reason: format!("expected {} components, found {}", table.dim, vector.len()),
                });
            }
            table.insert(token, vector)?;
        }
        table.ok_or(TextError::EmptyEmbeddingFile)
    }
}

/// How token vectors are combined into a document vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMode {
    /// Plain average over token occurrences.
    Mean,
    /// Average weighted by tf(t) x idf(t); requires vocabulary stats.
    TfidfWeighted,
}

/// Compose a document vector from its tokens' word vectors.
///
/// Tokens absent from the table are skipped. In weighted mode, tokens absent
/// from the stats get weight 0. If nothing contributes, the zero vector is
/// returned.
pub fn embed_doc(
    doc: &TokenizedDoc,
    table: &EmbeddingTable,
    stats: Option<&VocabularyStats>,
    mode: EmbedMode,
) -> Result<DenseVector, TextError> {
    let mut sum = vec![0.0; table.dim];
    let mut total_weight = 0.0;
    match mode {
        EmbedMode::Mean => {
            for token in &doc.tokens {
                if let Some(vector) = table.get(token) {
                    for (acc, &c) in sum.iter_mut().zip(vector) {
                        *acc += c;
                    }
                    total_weight += 1.0;
                }
            }
        }
        EmbedMode::TfidfWeighted => {
            let stats = stats.ok_or(TextError::MissingStats)?;
            // Order-stable map: the accumulation order of the weighted sum
            // must not vary run to run.
            let mut tf: std::collections::BTreeMap<&str, f64> = std::collections::BTreeMap::new();
            for token in &doc.tokens {
                *tf.entry(token.as_str()).or_insert(0.0) += 1.0;
            }
            for (token, count) in tf {
                let Some(vector) = table.get(token) else {
                    continue;
                };
                let Some(idf) = stats.idf(token) else {
                    continue;
                };
                let weight = count * idf;
                for (acc, &c) in sum.iter_mut().zip(vector) {
                    *acc += weight * c;
                }
                total_weight += weight;
            }
        }
    }
    if total_weight > 0.0 {
        for c in &mut sum {
            *c /= total_weight;
        }
    }
    Ok(DenseVector(sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::vocab::{build_vocab_stats, NgramMax};
    use std::io::Write;

    fn table_ab() -> EmbeddingTable {
        let mut table = EmbeddingTable::new(2);
        table.insert("a", vec![1.0, 0.0]).unwrap();
        table.insert("b", vec![0.0, 1.0]).unwrap();
        table
    }

    fn doc(id: &str, words: &[&str]) -> TokenizedDoc {
        TokenizedDoc::from_tokens(id, words.iter().map(|w| w.to_string()).collect())
    }

    #[test]
    fn singleton_mean_is_the_token_vector() {
        let v = embed_doc(&doc("d", &["a"]), &table_ab(), None, EmbedMode::Mean).unwrap();
        assert_eq!(v.0, vec![1.0, 0.0]);
    }

    #[test]
    fn equal_weights_give_midpoint() {
        let v = embed_doc(&doc("d", &["a", "b"]), &table_ab(), None, EmbedMode::Mean).unwrap();
        assert_eq!(v.0, vec![0.5, 0.5]);
    }

    #[test]
    fn weighted_average_matches_hand_computation() {
        // idf(a) = 1, idf(b) = 3; doc {a, a, b} -> weights 2 and 3.
        let mut stats = build_vocab_stats([doc("d", &["a", "b"])].iter(), NgramMax::Unigrams, 1)
            .unwrap();
        stats.idf.insert("a".to_string(), 1.0);
        stats.idf.insert("b".to_string(), 3.0);
        let v = embed_doc(
            &doc("q", &["a", "a", "b"]),
            &table_ab(),
            Some(&stats),
            EmbedMode::TfidfWeighted,
        )
        .unwrap();
        assert!((v.0[0] - 0.4).abs() < 1e-12);
        assert!((v.0[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn all_tokens_out_of_table_is_zero_vector() {
        let v = embed_doc(&doc("d", &["zzz"]), &table_ab(), None, EmbedMode::Mean).unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn weighted_mode_requires_stats() {
        let err = embed_doc(&doc("d", &["a"]), &table_ab(), None, EmbedMode::TfidfWeighted)
            .unwrap_err();
        assert!(matches!(err, TextError::MissingStats));
    }

    #[test]
    fn dense_cosine_hand_case() {
        let a = DenseVector(vec![1.0, 0.0]);
        let b = DenseVector(vec![1.0, 1.0]);
        let expected = 1.0 / 2.0_f64.sqrt();
        assert!((a.cosine(&b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dense_cosine_dimension_mismatch() {
        let a = DenseVector(vec![1.0]);
        let b = DenseVector(vec![1.0, 0.0]);
        assert!(a.cosine(&b).is_err());
    }

    #[test]
    fn dense_cosine_zero_norm_is_zero() {
        let a = DenseVector(vec![0.0, 0.0]);
        let b = DenseVector(vec![1.0, 1.0]);
        assert_eq!(a.cosine(&b).unwrap(), 0.0);
    }

    #[test]
    fn load_plain_file_and_header_file() {
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("plain.txt");
        std::fs::write(&plain, "a 1.0 0.0\nb 0.0 1.0\na 9.0 9.0\n").unwrap();
        let table = EmbeddingTable::load(&plain).unwrap();
        assert_eq!(table.dim, 2);
        assert_eq!(table.len(), 2);
        // Duplicate keeps the first occurrence.
        assert_eq!(table.get("a").unwrap(), &[1.0, 0.0]);

        let with_header = dir.path().join("header.txt");
        let mut f = File::create(&with_header).unwrap();
        writeln!(f, "2 3").unwrap();
        writeln!(f, "x 1 2 3").unwrap();
        writeln!(f, "y 4 5 6").unwrap();
        drop(f);
        let table = EmbeddingTable::load(&with_header).unwrap();
        assert_eq!(table.dim, 3);
        assert_eq!(table.len(), 2);
    }

    #[test]
    fn load_rejects_ragged_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ragged.txt");
        std::fs::write(&path, "a 1.0 2.0\nb 1.0\n").unwrap();
        let err = EmbeddingTable::load(&path).unwrap_err();
        assert!(matches!(err, TextError::EmbeddingParse { line: 2, .. }));
    }
}
