//! Corpus document frequencies, idf, and sparse tf-idf vectors.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::token::TokenizedDoc;
use super::TextError;

/// Largest n-gram order counted when building vocabulary statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NgramMax {
    Unigrams,
    Bigrams,
}

impl NgramMax {
    pub fn from_order(order: u8) -> Option<Self> {
        match order {
            1 => Some(Self::Unigrams),
            2 => Some(Self::Bigrams),
            _ => None,
        }
    }
}

/// Document frequencies and idf values over a corpus.
///
/// idf(t) = ln(n_docs / df(t)) + 1, so idf stays strictly positive even for
/// terms present in every document. Terms below `min_df` are dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyStats {
    pub n_docs: usize,
    pub df: BTreeMap<String, u32>,
    pub idf: BTreeMap<String, f64>,
    pub ngram_max: NgramMax,
    pub min_df: u32,
}

impl VocabularyStats {
    pub fn idf(&self, term: &str) -> Option<f64> {
        self.idf.get(term).copied()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.idf.contains_key(term)
    }

    pub fn vocab_size(&self) -> usize {
        self.idf.len()
    }

    /// Median of the stored idf values; used to separate content words from
    /// function words. Returns 0 for an empty vocabulary.
    pub fn median_idf(&self) -> f64 {
        if self.idf.is_empty() {
            return 0.0;
        }
        let mut values: Vec<f64> = self.idf.values().copied().collect();
        values.sort_by(f64::total_cmp);
        let mid = values.len() / 2;
        if values.len() % 2 == 1 {
            values[mid]
        } else {
            (values[mid - 1] + values[mid]) / 2.0
        }
    }
}

/// The terms of a document under the given n-gram order. Bigrams are encoded
/// as the two tokens joined by a single space, which cannot collide with
/// unigrams because tokens contain no whitespace.
pub fn ngram_terms(tokens: &[String], ngram_max: NgramMax) -> Vec<String> {
    let mut terms: Vec<String> = tokens.to_vec();
    if ngram_max == NgramMax::Bigrams {
        for pair in tokens.windows(2) {
            terms.push(format!("{} {}", pair[0], pair[1]));
        }
    }
    terms
}

/// Count document frequencies over the corpus and derive idf values.
///
/// Each term counts once per document regardless of how often it repeats.
pub fn build_vocab_stats<'a, I>(
    docs: I,
    ngram_max: NgramMax,
    min_df: u32,
) -> Result<VocabularyStats, TextError>
where
    I: IntoIterator<Item = &'a TokenizedDoc>,
{
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    let mut n_docs = 0usize;
    for doc in docs {
        n_docs += 1;
        let unique: BTreeSet<String> = ngram_terms(&doc.tokens, ngram_max).into_iter().collect();
        for term in unique {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    if n_docs == 0 {
        return Err(TextError::EmptyCorpus);
    }
    df.retain(|_, count| *count >= min_df);
    let idf: BTreeMap<String, f64> = df
        .iter()
        .map(|(term, &count)| {
            let idf = (n_docs as f64 / f64::from(count)).ln() + 1.0;
            (term.clone(), idf)
        })
        .collect();
    Ok(VocabularyStats {
        n_docs,
        df,
        idf,
        ngram_max,
        min_df,
    })
}

/// A sparse term-weight vector. Zero weights are never stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub entries: BTreeMap<String, f64>,
}

impl SparseVector {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        // Iterate the smaller map, probe the larger.
        let (small, large) = if self.entries.len() <= other.entries.len() {
            (&self.entries, &other.entries)
        } else {
            (&other.entries, &self.entries)
        };
        small
            .iter()
            .filter_map(|(term, w)| large.get(term).map(|v| w * v))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Cosine similarity; 0 when either vector has zero norm. Clamped to
    /// [-1, 1] so accumulated rounding can never leak out of range.
    pub fn cosine(&self, other: &SparseVector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return 0.0;
        }
        (self.dot(other) / denom).clamp(-1.0, 1.0)
    }
}

/// L2-normalized tf-idf vector of a document against fixed corpus stats.
///
/// Terms absent from the stats are ignored; a document with no in-vocabulary
/// terms yields an empty (zero) vector.
pub fn tfidf_vector(doc: &TokenizedDoc, stats: &VocabularyStats) -> SparseVector {
    let mut tf: BTreeMap<String, f64> = BTreeMap::new();
    for term in ngram_terms(&doc.tokens, stats.ngram_max) {
        if stats.contains(&term) {
            *tf.entry(term).or_insert(0.0) += 1.0;
        }
    }
    let mut entries: BTreeMap<String, f64> = tf
        .into_iter()
        .map(|(term, count)| {
            let weight = count * stats.idf[&term];
            (term, weight)
        })
        .collect();
    let norm = entries.values().map(|w| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for weight in entries.values_mut() {
            *weight /= norm;
        }
    }
    SparseVector { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, words: &[&str]) -> TokenizedDoc {
        TokenizedDoc::from_tokens(id, words.iter().map(|w| w.to_string()).collect())
    }

    #[test]
    fn single_doc_idf_is_one() {
        let stats = build_vocab_stats([doc("d", &["a", "b"])].iter(), NgramMax::Unigrams, 1).unwrap();
        assert_eq!(stats.df["a"], 1);
        assert_eq!(stats.idf["a"], 1.0);
        assert_eq!(stats.idf["b"], 1.0);
    }

    #[test]
    fn idf_matches_hand_computation_on_ten_docs() {
        // "common" in all 10 docs, "rare" in exactly one.
        let docs: Vec<TokenizedDoc> = (0..10)
            .map(|i| {
                if i == 0 {
                    doc(&format!("d{i}"), &["common", "rare"])
                } else {
                    doc(&format!("d{i}"), &["common"])
                }
            })
            .collect();
        let stats = build_vocab_stats(docs.iter(), NgramMax::Unigrams, 1).unwrap();
        assert!((stats.idf["common"] - 1.0).abs() < 1e-12);
        assert!((stats.idf["rare"] - (10.0_f64.ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn min_df_drops_rare_terms() {
        let docs: Vec<TokenizedDoc> = (0..60)
            .map(|i| {
                if i < 50 {
                    doc(&format!("d{i}"), &["kept", "filler"])
                } else {
                    doc(&format!("d{i}"), &["dropped", "filler"])
                }
            })
            .collect();
        let stats = build_vocab_stats(docs.iter(), NgramMax::Unigrams, 50).unwrap();
        assert!(stats.contains("kept"));
        assert!(stats.contains("filler"));
        assert!(!stats.contains("dropped"));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let err = build_vocab_stats([].iter(), NgramMax::Unigrams, 1).unwrap_err();
        assert!(matches!(err, TextError::EmptyCorpus));
    }

    #[test]
    fn bigrams_are_counted() {
        let stats =
            build_vocab_stats([doc("d", &["a", "b", "a"])].iter(), NgramMax::Bigrams, 1).unwrap();
        assert!(stats.contains("a b"));
        assert!(stats.contains("b a"));
        assert!(stats.contains("a"));
    }

    #[test]
    fn tfidf_oov_doc_is_empty() {
        let stats = build_vocab_stats([doc("d", &["a"])].iter(), NgramMax::Unigrams, 1).unwrap();
        let vec = tfidf_vector(&doc("q", &["zzz"]), &stats);
        assert!(vec.is_empty());
        assert_eq!(vec.norm(), 0.0);
    }

    #[test]
    fn tfidf_weights_proportional_to_tf_times_idf() {
        // 3 docs: "a" in all three (idf 1), "b" in one (idf ln3+1).
        let docs = vec![doc("d0", &["a", "b"]), doc("d1", &["a"]), doc("d2", &["a"])];
        let stats = build_vocab_stats(docs.iter(), NgramMax::Unigrams, 1).unwrap();
        let v = tfidf_vector(&doc("q", &["a", "a", "b"]), &stats);
        let idf_b = 3.0_f64.ln() + 1.0;
        let raw_a = 2.0 * 1.0;
        let raw_b = 1.0 * idf_b;
        let norm = (raw_a * raw_a + raw_b * raw_b).sqrt();
        assert!((v.entries["a"] - raw_a / norm).abs() < 1e-12);
        assert!((v.entries["b"] - raw_b / norm).abs() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_of_identical_vectors_is_one() {
        let stats = build_vocab_stats([doc("d", &["a", "b"])].iter(), NgramMax::Unigrams, 1).unwrap();
        let v = tfidf_vector(&doc("q", &["a", "b"]), &stats);
        assert!((v.cosine(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_disjoint_support_is_zero() {
        let a = SparseVector {
            entries: [("x".to_string(), 1.0)].into_iter().collect(),
        };
        let b = SparseVector {
            entries: [("y".to_string(), 2.0)].into_iter().collect(),
        };
        assert_eq!(a.cosine(&b), 0.0);
    }

    #[test]
    fn median_idf_odd_and_even() {
        let stats = VocabularyStats {
            n_docs: 4,
            df: BTreeMap::new(),
            idf: [("a", 1.0), ("b", 2.0), ("c", 4.0)]
                .into_iter()
                .map(|(t, v)| (t.to_string(), v))
                .collect(),
            ngram_max: NgramMax::Unigrams,
            min_df: 1,
        };
        assert_eq!(stats.median_idf(), 2.0);
        let mut even = stats.clone();
        even.idf.insert("d".to_string(), 6.0);
        assert_eq!(even.median_idf(), 3.0);
    }

    fn sparse_strategy() -> impl Strategy<Value = SparseVector> {
        proptest::collection::btree_map("[a-j]", 0.01f64..10.0, 0..10).prop_map(|entries| {
            SparseVector {
                entries: entries.into_iter().collect(),
            }
        })
    }

    proptest! {
        #[test]
        fn idf_is_antitone_in_df(counts in proptest::collection::vec(1u32..20, 2..6)) {
            let n = 20usize;
            let docs: Vec<TokenizedDoc> = (0..n)
                .map(|i| {
                    let words: Vec<String> = counts
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| i < c as usize)
                        .map(|(t, _)| format!("t{t}"))
                        .collect();
                    TokenizedDoc::from_tokens(format!("d{i}"), words)
                })
                .collect();
            let stats = build_vocab_stats(docs.iter(), NgramMax::Unigrams, 1).unwrap();
            let terms: Vec<&String> = stats.df.keys().collect();
            for a in &terms {
                for b in &terms {
                    if stats.df[*a] < stats.df[*b] {
                        prop_assert!(stats.idf[*a] > stats.idf[*b]);
                    }
                }
            }
        }

        #[test]
        fn cosine_is_symmetric_and_bounded(a in sparse_strategy(), b in sparse_strategy()) {
            let ab = a.cosine(&b);
            let ba = b.cosine(&a);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn cosine_is_scale_invariant(a in sparse_strategy(), b in sparse_strategy(), k in 0.01f64..100.0) {
            let scaled = SparseVector {
                entries: a.entries.iter().map(|(t, w)| (t.clone(), w * k)).collect(),
            };
            prop_assert!((scaled.cosine(&b) - a.cosine(&b)).abs() < 1e-9);
        }

        #[test]
        fn cosine_matches_brute_force(a in sparse_strategy(), b in sparse_strategy()) {
            // Dense brute-force oracle over the union of the supports.
            let mut terms: Vec<&String> = a.entries.keys().chain(b.entries.keys()).collect();
            terms.sort();
            terms.dedup();
            let dense = |v: &SparseVector| -> Vec<f64> {
                terms.iter().map(|t| v.entries.get(*t).copied().unwrap_or(0.0)).collect()
            };
            let da = dense(&a);
            let db = dense(&b);
            let dot: f64 = da.iter().zip(&db).map(|(x, y)| x * y).sum();
            let na: f64 = da.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = db.iter().map(|x| x * x).sum::<f64>().sqrt();
            let expected = if na == 0.0 || nb == 0.0 { 0.0 } else { (dot / (na * nb)).clamp(-1.0, 1.0) };
            prop_assert!((a.cosine(&b) - expected).abs() < 1e-12);
        }

        #[test]
        fn tfidf_norm_is_zero_or_one(tokens in proptest::collection::vec("[a-f]", 0..12)) {
            let corpus = vec![
                TokenizedDoc::from_tokens("d0", vec!["a".into(), "b".into(), "c".into()]),
                TokenizedDoc::from_tokens("d1", vec!["c".into(), "d".into()]),
            ];
            let stats = build_vocab_stats(corpus.iter(), NgramMax::Unigrams, 1).unwrap();
            let doc = TokenizedDoc::from_tokens("q", tokens);
            let norm = tfidf_vector(&doc, &stats).norm();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-9);
        }
    }
}
