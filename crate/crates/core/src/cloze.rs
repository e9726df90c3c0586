//! Question detection, narrative masking, and ground-truth selection.
//!
//! A post is scanned sentence by sentence (title first); question sentences
//! are stripped to form the cloze narrative, and one specific, well-formed
//! question among those removed becomes the ground-truth answer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::text::{split_sentences, tokenize, TokenizedDoc, VocabularyStats};
use crate::ingest::Post;

/// First words that flag a sentence as a question even without a `?`.
pub const DETECTION_START_WORDS: &[&str] = &[
    "why", "how", "am", "is", "are", "do", "does", "did", "can", "could", "should", "would",
];

/// Interrogatives a ground-truth question may start with.
pub const INTERROGATIVES: &[&str] = &[
    "what", "when", "why", "where", "which", "who", "whom", "whose", "how", "am", "is", "are",
    "was", "were", "do", "does", "did", "has", "have", "had", "can", "could", "shall", "should",
    "will", "would", "may", "might", "must",
];

/// Additional allowed ground-truth start words.
pub const SUPPLEMENT_START_WORDS: &[&str] = &["any", "anyone", "help", "advice", "thoughts"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionSource {
    Title,
    Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectedBy {
    /// The sentence ends with `?`.
    Terminator,
    /// The sentence starts with a detection word but lacks a `?`.
    StartWord,
}

/// A sentence flagged as a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionCandidate {
    pub text: String,
    pub source: QuestionSource,
    pub sentence_index: usize,
    pub detected_by: DetectedBy,
}

/// A post with all detected questions stripped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClozeNarrative {
    pub post_id: String,
    pub masked_text: String,
    pub removed_questions: Vec<QuestionCandidate>,
    pub token_count: usize,
}

/// A selected ground-truth question for one narrative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthQuestion {
    pub text: String,
    pub specificity: f64,
    pub post_id: String,
}

fn classify_sentence(sentence: &str) -> Option<DetectedBy> {
    if sentence.trim_end().ends_with('?') {
        return Some(DetectedBy::Terminator);
    }
    let first = tokenize(sentence).into_iter().next()?;
    if DETECTION_START_WORDS.contains(&first.as_str()) {
        Some(DetectedBy::StartWord)
    } else {
        None
    }
}

/// Flag the question sentences of a post, title first, in document order.
pub fn detect_questions(post: &Post) -> Vec<QuestionCandidate> {
    let mut candidates = Vec::new();
    for (source, text) in [(QuestionSource::Title, &post.title), (QuestionSource::Body, &post.body)] {
        for (sentence_index, sentence) in split_sentences(text).into_iter().enumerate() {
            if let Some(detected_by) = classify_sentence(&sentence) {
                candidates.push(QuestionCandidate {
                    text: sentence,
                    source,
                    sentence_index,
                    detected_by,
                });
            }
        }
    }
    candidates
}

fn strip_flagged(text: &str, source: QuestionSource, candidates: &[QuestionCandidate]) -> String {
    let flagged: Vec<usize> = candidates
        .iter()
        .filter(|c| c.source == source)
        .map(|c| c.sentence_index)
        .collect();
    split_sentences(text)
        .into_iter()
        .enumerate()
        .filter(|(index, _)| !flagged.contains(index))
        .map(|(_, sentence)| sentence)
        .collect::<Vec<String>>()
        .join(" ")
}

/// Remove all candidate sentences from the post; remaining title content is
/// prepended to the remaining body with a newline. The length filter is
/// applied separately.
pub fn mask_narrative(post: &Post, candidates: &[QuestionCandidate]) -> ClozeNarrative {
    let title_rest = strip_flagged(&post.title, QuestionSource::Title, candidates);
    let body_rest = strip_flagged(&post.body, QuestionSource::Body, candidates);
    let masked_text = match (title_rest.is_empty(), body_rest.is_empty()) {
        (false, false) => format!("{title_rest}\n{body_rest}"),
        (false, true) => title_rest,
        (true, _) => body_rest,
    };
    let token_count = tokenize(&masked_text).len();
    ClozeNarrative {
        post_id: post.id.clone(),
        masked_text,
        removed_questions: candidates.to_vec(),
        token_count,
    }
}

/// Inclusive token-count bounds for a usable cloze text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBounds {
    pub min: usize,
    pub max: usize,
}

impl Default for LengthBounds {
    fn default() -> Self {
        Self { min: 50, max: 300 }
    }
}

pub fn passes_length_filter(narrative: &ClozeNarrative, bounds: LengthBounds) -> bool {
    narrative.token_count >= bounds.min && narrative.token_count <= bounds.max
}

/// Specificity S of a question: the maximum idf over its tokens, counting
/// tokens absent from the stats as 0.
pub fn question_specificity(tokens: &[String], stats: &VocabularyStats) -> f64 {
    tokens
        .iter()
        .map(|t| stats.idf(t).unwrap_or(0.0))
        .fold(0.0, f64::max)
}

/// Ground-truth filtering knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Minimum specificity S a question must reach.
    pub specificity_threshold: f64,
    /// Minimum word count (the terminal `?` is punctuation, not a word).
    pub min_words: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            specificity_threshold: 5.0,
            min_words: 5,
        }
    }
}

fn allowed_start(first_token: &str) -> bool {
    INTERROGATIVES.contains(&first_token) || SUPPLEMENT_START_WORDS.contains(&first_token)
}

/// The candidates that survive all three ground-truth filters: allowed start
/// word, minimum word count, and specificity threshold. Only `?`-terminated
/// candidates are eligible.
pub fn surviving_candidates<'a>(
    candidates: &'a [QuestionCandidate],
    stats: &VocabularyStats,
    config: SelectionConfig,
) -> Vec<&'a QuestionCandidate> {
    candidates
        .iter()
        .filter(|c| c.detected_by == DetectedBy::Terminator)
        .filter(|c| {
            let tokens = tokenize(&c.text);
            let Some(first) = tokens.first() else {
                return false;
            };
            allowed_start(first)
                && tokens.len() >= config.min_words
                && question_specificity(&tokens, stats) >= config.specificity_threshold
        })
        .collect()
}

/// Pick one surviving question uniformly at random, or none if every
/// candidate was filtered out.
pub fn select_ground_truth<R: Rng>(
    candidates: &[QuestionCandidate],
    stats: &VocabularyStats,
    config: SelectionConfig,
    post_id: &str,
    rng: &mut R,
) -> Option<GroundTruthQuestion> {
    let survivors = surviving_candidates(candidates, stats, config);
    if survivors.is_empty() {
        return None;
    }
    let chosen = survivors[rng.random_range(0..survivors.len())];
    Some(GroundTruthQuestion {
        text: chosen.text.clone(),
        specificity: question_specificity(&tokenize(&chosen.text), stats),
        post_id: post_id.to_string(),
    })
}

/// One line of the extraction stage output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeRecord {
    pub post_id: String,
    pub masked_text: String,
    pub token_count: usize,
    pub ground_truth_question: String,
    pub specificity: f64,
    pub discarded_questions: Vec<String>,
}

impl NarrativeRecord {
    pub fn tokenized(&self) -> TokenizedDoc {
        TokenizedDoc::new(self.post_id.clone(), &self.masked_text)
    }

    pub fn tokenized_question(&self) -> TokenizedDoc {
        TokenizedDoc::new(format!("{}#q", self.post_id), &self.ground_truth_question)
    }
}

/// Why a post dropped out of extraction; used for stage counting.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtractOutcome {
    NoBody,
    NoQuestions,
    LengthFail(ClozeNarrative),
    NoSpecificQuestion(ClozeNarrative),
    Kept(Box<NarrativeRecord>),
}

/// Full per-post extraction: detect, mask, length-filter, select.
pub fn extract_post<R: Rng>(
    post: &Post,
    stats: &VocabularyStats,
    bounds: LengthBounds,
    config: SelectionConfig,
    rng: &mut R,
) -> ExtractOutcome {
    if post.body.trim().is_empty() {
        return ExtractOutcome::NoBody;
    }
    let candidates = detect_questions(post);
    if candidates.is_empty() {
        return ExtractOutcome::NoQuestions;
    }
    let narrative = mask_narrative(post, &candidates);
    if !passes_length_filter(&narrative, bounds) {
        return ExtractOutcome::LengthFail(narrative);
    }
    let Some(ground_truth) = select_ground_truth(&candidates, stats, config, &post.id, rng) else {
        return ExtractOutcome::NoSpecificQuestion(narrative);
    };
    let discarded_questions = candidates
        .iter()
        .map(|c| c.text.clone())
        .filter(|text| *text != ground_truth.text)
        .collect();
    ExtractOutcome::Kept(Box::new(NarrativeRecord {
        post_id: post.id.clone(),
        masked_text: narrative.masked_text,
        token_count: narrative.token_count,
        ground_truth_question: ground_truth.text,
        specificity: ground_truth.specificity,
        discarded_questions,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{build_vocab_stats, NgramMax};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn figure_post() -> Post {
        Post {
            id: "fig".to_string(),
            title: "How can I energize myself?".to_string(),
            body: "I am generally a person who needs a lot of sleep, but today I was not able \
                   to sleep more than 6 hours and I am extremely tired. My eyes hurt and two \
                   hours later I have programming lesson so I have to be alert. I've already \
                   drunk a cup of coffee and although I rarely drink coffee, it had no effect \
                   on me. I am not at home so I have limited possibilities as for food. I \
                   don't want to do anything too unhealthy such as drinking 10 cups of coffee, \
                   tho I may consider drinking another one. Help? What has worked for you?"
                .to_string(),
            created: None,
        }
    }

    /// Stats over a 60-doc toy corpus where "energize" appears once
    /// (idf = ln 60 + 1 > 5) and every other figure-post word is ubiquitous
    /// (idf = 1 < 5).
    fn figure_stats() -> VocabularyStats {
        let common: Vec<String> = tokenize(&format!(
            "{} {}",
            figure_post().title,
            figure_post().body
        ))
        .into_iter()
        .filter(|t| t != "energize")
        .collect();
        let docs: Vec<TokenizedDoc> = (0..60)
            .map(|i| {
                let mut tokens = common.clone();
                if i == 0 {
                    tokens.push("energize".to_string());
                }
                TokenizedDoc::from_tokens(format!("d{i}"), tokens)
            })
            .collect();
        build_vocab_stats(docs.iter(), NgramMax::Unigrams, 1).unwrap()
    }

    #[test]
    fn figure_post_candidates() {
        let candidates = detect_questions(&figure_post());
        let texts: Vec<&str> = candidates.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(
            texts,
            vec!["How can I energize myself?", "Help?", "What has worked for you?"]
        );
        assert_eq!(candidates[0].source, QuestionSource::Title);
        assert!(candidates.iter().all(|c| c.detected_by == DetectedBy::Terminator));
    }

    #[test]
    fn start_word_detection_without_question_mark() {
        let post = Post {
            id: "p".to_string(),
            title: String::new(),
            body: "Should I drop chemistry honors. I like coffee.".to_string(),
            created: None,
        };
        let candidates = detect_questions(&post);
        assert_eq!(candidates.len(), 1);
        assert_eq!(candidates[0].text, "Should I drop chemistry honors.");
        assert_eq!(candidates[0].detected_by, DetectedBy::StartWord);
    }

    #[test]
    fn declarative_sentences_are_not_detected() {
        let post = Post {
            id: "p".to_string(),
            title: String::new(),
            body: "I like coffee.".to_string(),
            created: None,
        };
        assert!(detect_questions(&post).is_empty());
    }

    #[test]
    fn figure_post_masking_strips_all_questions() {
        let post = figure_post();
        let narrative = mask_narrative(&post, &detect_questions(&post));
        assert!(narrative
            .masked_text
            .starts_with("I am generally a person who needs a lot of sleep"));
        assert!(!narrative.masked_text.contains("Help?"));
        assert!(!narrative.masked_text.contains("What has worked for you?"));
        assert!(!narrative.masked_text.contains("How can I energize myself?"));
        // The cloze text passes the 50-300 token filter.
        assert!(passes_length_filter(&narrative, LengthBounds::default()));
    }

    #[test]
    fn masking_without_questions_is_identity() {
        let post = Post {
            id: "p".to_string(),
            title: "A plain statement.".to_string(),
            body: "Nothing interrogative here.".to_string(),
            created: None,
        };
        let narrative = mask_narrative(&post, &[]);
        assert_eq!(narrative.masked_text, "A plain statement.\nNothing interrogative here.");
    }

    #[test]
    fn all_question_body_leaves_title_only() {
        let post = Post {
            id: "p".to_string(),
            title: "My situation got complicated.".to_string(),
            body: "What now? Should I wait?".to_string(),
            created: None,
        };
        let narrative = mask_narrative(&post, &detect_questions(&post));
        assert_eq!(narrative.masked_text, "My situation got complicated.");
    }

    #[test]
    fn remasking_detects_nothing() {
        let post = figure_post();
        let narrative = mask_narrative(&post, &detect_questions(&post));
        let remasked = Post {
            id: "re".to_string(),
            title: String::new(),
            body: narrative.masked_text,
            created: None,
        };
        assert!(detect_questions(&remasked).is_empty());
    }

    #[test]
    fn length_filter_boundaries() {
        let narrative = |count: usize| ClozeNarrative {
            post_id: "p".to_string(),
            masked_text: String::new(),
            removed_questions: Vec::new(),
            token_count: count,
        };
        let bounds = LengthBounds::default();
        assert!(!passes_length_filter(&narrative(49), bounds));
        assert!(passes_length_filter(&narrative(50), bounds));
        assert!(passes_length_filter(&narrative(300), bounds));
        assert!(!passes_length_filter(&narrative(301), bounds));
    }

    #[test]
    fn specificity_of_oov_question_is_zero() {
        let stats = figure_stats();
        let tokens = vec!["zzz".to_string(), "qqq".to_string()];
        assert_eq!(question_specificity(&tokens, &stats), 0.0);
        assert_eq!(question_specificity(&[], &stats), 0.0);
    }

    #[test]
    fn specificity_is_max_idf() {
        // 10-doc corpus: ubiquitous words idf 1, one df=1 word idf ln10+1.
        let docs: Vec<TokenizedDoc> = (0..10)
            .map(|i| {
                let mut tokens: Vec<String> =
                    ["what", "should", "i", "do", "now"].iter().map(|s| s.to_string()).collect();
                if i == 3 {
                    tokens.push("ultimatum".to_string());
                }
                TokenizedDoc::from_tokens(format!("d{i}"), tokens)
            })
            .collect();
        let stats = build_vocab_stats(docs.iter(), NgramMax::Unigrams, 1).unwrap();
        let common: Vec<String> =
            ["what", "should", "i", "do", "now"].iter().map(|s| s.to_string()).collect();
        assert!((question_specificity(&common, &stats) - 1.0).abs() < 1e-12);
        let with_rare: Vec<String> = ["what", "about", "the", "ultimatum"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert!(
            (question_specificity(&with_rare, &stats) - (10.0_f64.ln() + 1.0)).abs() < 1e-12
        );
    }

    #[test]
    fn figure_selection_keeps_the_title_question() {
        let post = figure_post();
        let stats = figure_stats();
        let candidates = detect_questions(&post);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let chosen = select_ground_truth(
            &candidates,
            &stats,
            SelectionConfig::default(),
            &post.id,
            &mut rng,
        )
        .unwrap();
        // "Help?" fails the word count, "What has worked for you?" fails the
        // specificity threshold; only the title survives.
        assert_eq!(chosen.text, "How can I energize myself?");
        assert!(chosen.specificity >= 5.0);
    }

    #[test]
    fn selection_is_deterministic_under_a_fixed_seed() {
        let stats = figure_stats();
        // Two candidates that both survive (threshold 0).
        let candidates = vec![
            QuestionCandidate {
                text: "What has worked for you today?".to_string(),
                source: QuestionSource::Body,
                sentence_index: 0,
                detected_by: DetectedBy::Terminator,
            },
            QuestionCandidate {
                text: "How can I energize myself properly?".to_string(),
                source: QuestionSource::Body,
                sentence_index: 1,
                detected_by: DetectedBy::Terminator,
            },
        ];
        let config = SelectionConfig {
            specificity_threshold: 0.0,
            min_words: 5,
        };
        let pick = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            select_ground_truth(&candidates, &stats, config, "p", &mut rng)
                .unwrap()
                .text
        };
        assert_eq!(pick(7), pick(7));
        // Both candidates are reachable across seeds.
        let picks: std::collections::BTreeSet<String> = (0..32).map(pick).collect();
        assert_eq!(picks.len(), 2);
    }

    #[test]
    fn start_word_only_candidates_are_never_selected() {
        let stats = figure_stats();
        let candidates = vec![QuestionCandidate {
            text: "Should I drop chemistry honors.".to_string(),
            source: QuestionSource::Body,
            sentence_index: 0,
            detected_by: DetectedBy::StartWord,
        }];
        let config = SelectionConfig {
            specificity_threshold: 0.0,
            min_words: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(select_ground_truth(&candidates, &stats, config, "p", &mut rng).is_none());
    }

    #[test]
    fn selection_soundness_survivors_pass_all_filters() {
        let stats = figure_stats();
        let post = figure_post();
        let candidates = detect_questions(&post);
        let config = SelectionConfig::default();
        for candidate in surviving_candidates(&candidates, &stats, config) {
            let tokens = tokenize(&candidate.text);
            assert!(allowed_start(&tokens[0]));
            assert!(tokens.len() >= config.min_words);
            assert!(question_specificity(&tokens, &stats) >= config.specificity_threshold);
        }
    }

    #[test]
    fn raising_threshold_never_adds_survivors() {
        let stats = figure_stats();
        let post = figure_post();
        let candidates = detect_questions(&post);
        let mut previous = usize::MAX;
        for threshold in [0.0, 1.0, 3.0, 5.0, 9.0] {
            let config = SelectionConfig {
                specificity_threshold: threshold,
                min_words: 5,
            };
            let count = surviving_candidates(&candidates, &stats, config).len();
            assert!(count <= previous);
            previous = count;
        }
    }

    #[test]
    fn extract_post_outcomes() {
        let stats = figure_stats();
        let bounds = LengthBounds::default();
        let config = SelectionConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);

        let no_body = Post {
            id: "p".to_string(),
            title: "Title only".to_string(),
            body: "  ".to_string(),
            created: None,
        };
        assert!(matches!(
            extract_post(&no_body, &stats, bounds, config, &mut rng),
            ExtractOutcome::NoBody
        ));

        let no_questions = Post {
            id: "p".to_string(),
            title: String::new(),
            body: "Just statements. Nothing else.".to_string(),
            created: None,
        };
        assert!(matches!(
            extract_post(&no_questions, &stats, bounds, config, &mut rng),
            ExtractOutcome::NoQuestions
        ));

        let too_short = Post {
            id: "p".to_string(),
            title: String::new(),
            body: "One sentence only. What should I do about it now?".to_string(),
            created: None,
        };
        assert!(matches!(
            extract_post(&too_short, &stats, bounds, config, &mut rng),
            ExtractOutcome::LengthFail(_)
        ));

        let kept = extract_post(&figure_post(), &stats, bounds, config, &mut rng);
        let ExtractOutcome::Kept(record) = kept else {
            panic!("figure post should be kept");
        };
        assert_eq!(record.ground_truth_question, "How can I energize myself?");
        assert_eq!(
            record.discarded_questions,
            vec!["Help?".to_string(), "What has worked for you?".to_string()]
        );
    }
}
