//! Deterministic synthetic fixtures: a 200-post benchmark corpus that
//! exercises every pipeline stage, and a 200-instance annotation file with
//! known aggregate statistics for validating the report logic.
//!
//! Posts come in 100 two-post topics. Both posts of a topic share topic
//! vocabulary (so their narratives pair up by tf-idf cosine) while carrying
//! their own rare words (so their ground-truth questions clear the
//! specificity filter). A handful of topics are deliberately degenerate —
//! short bodies, no questions, generic-only questions, out-of-window
//! sentence vectors — so stage counts and discard counters stay non-trivial.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::eval::{AnnotationRecord, Plausibility};
use crate::pairing::{ClozeInstance, InstanceDiagnostics, Slot};
use crate::seeding::substream_rng;

const FILLER: &[&str] = &[
    "i", "was", "with", "and", "then", "we", "went", "to", "the", "a", "my", "friend", "really",
    "about", "because", "after", "before", "again", "still", "very", "much", "time", "day",
    "week", "people", "things", "feel", "felt", "said", "told", "wanted", "know", "think",
    "thought", "maybe", "just", "also", "some", "other", "even",
];

const QUESTION_TEMPLATES: &[&str] = &[
    "How should I handle the {rare} {topic}?",
    "What can I do about the {rare} {topic}?",
    "Should I tell my {topic} about the {rare} problem?",
    "How do I deal with a {rare} {topic} like this?",
    "Is it wrong to keep the {rare} {topic} secret?",
    "What would you do about my {rare} {topic}?",
];

const GENERIC_QUESTIONS: &[&str] = &["What should I do?", "Any advice?", "Help?"];

const DECLARATIVE_TITLES: &[&str] = &[
    "My {topic} situation got complicated.",
    "Long story about my {topic}.",
    "Never expected this from my {topic}.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TopicKind {
    Normal,
    /// Both posts removed via the removal list.
    Removed,
    /// Both posts too short to pass the length filter.
    Short,
    /// No question sentences at all.
    NoQuestions,
    /// Only generic questions; nothing survives the specificity filter.
    GenericOnly,
    /// One post has an empty body.
    TitleOnlyFirst,
    /// Question sentence vectors nearly identical (window discards them).
    VectorsTooSimilar,
    /// Question sentence vectors orthogonal (window discards them).
    VectorsOrthogonal,
    /// First post's sentence vector missing from the vector file.
    VectorMissingFirst,
}

fn topic_kind(topic: usize) -> TopicKind {
    match topic {
        0 => TopicKind::Removed,
        1 => TopicKind::Short,
        2 => TopicKind::NoQuestions,
        3 => TopicKind::GenericOnly,
        4 => TopicKind::TitleOnlyFirst,
        5 | 6 => TopicKind::VectorsTooSimilar,
        7 | 8 => TopicKind::VectorsOrthogonal,
        9 => TopicKind::VectorMissingFirst,
        _ => TopicKind::Normal,
    }
}

/// Pronounceable nonce word that cannot collide with the filler vocabulary.
fn nonce_word(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
    loop {
        let syllables = rng.random_range(2..4);
        let mut word = String::new();
        for _ in 0..syllables {
            word.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            word.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        }
        if word.len() >= 4 && used.insert(word.clone()) {
            return word;
        }
    }
}

struct Topic {
    kind: TopicKind,
    words: Vec<String>,
    /// Unit direction in embedding space shared by the topic's vocabulary.
    direction: Vec<f64>,
}

struct PostSpec {
    id: String,
    topic: usize,
    title: String,
    body: String,
    /// Rare words owned by this post.
    rare: Vec<String>,
}

const EMBED_DIM: usize = 16;

fn random_unit(rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..EMBED_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.3 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn perturbed(base: &[f64], scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    base.iter()
        .map(|&x| x + rng.random_range(-scale..scale))
        .collect()
}

fn sentence(rng: &mut ChaCha8Rng, topic_words: &[String], rare_words: &[String]) -> String {
    let length = rng.random_range(8..12);
    let mut words: Vec<&str> = Vec::with_capacity(length);
    for _ in 0..length {
        let roll: f64 = rng.random();
        let word = if roll < 0.55 || topic_words.is_empty() {
            FILLER[rng.random_range(0..FILLER.len())]
        } else if roll < 0.85 {
            topic_words[rng.random_range(0..topic_words.len())].as_str()
        } else {
            rare_words[rng.random_range(0..rare_words.len())].as_str()
        };
        words.push(word);
    }
    let mut text = words.join(" ");
    if let Some(first) = text.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    text.push('.');
    text
}

fn specific_question(rng: &mut ChaCha8Rng, topic_words: &[String], rare: &str) -> String {
    let template = QUESTION_TEMPLATES[rng.random_range(0..QUESTION_TEMPLATES.len())];
    let topic_word = &topic_words[rng.random_range(0..topic_words.len())];
    template.replace("{rare}", rare).replace("{topic}", topic_word)
}

/// The four text files of the bundled synthetic benchmark.
#[derive(Debug, Clone)]
pub struct SyntheticFiles {
    pub posts_jsonl: String,
    pub removals_txt: String,
    pub embeddings_txt: String,
    pub sentence_vectors_txt: String,
}

pub const SYNTHETIC_TOPICS: usize = 100;

/// Generate the complete synthetic benchmark corpus for a root seed.
pub fn synthetic_corpus(seed: u64) -> SyntheticFiles {
    let mut word_rng = substream_rng(seed, "synthetic", "words");
    let mut used_words: BTreeSet<String> = FILLER.iter().map(|w| w.to_string()).collect();

    let mut topics: Vec<Topic> = Vec::with_capacity(SYNTHETIC_TOPICS);
    for index in 0..SYNTHETIC_TOPICS {
        let words: Vec<String> = (0..5).map(|_| nonce_word(&mut word_rng, &mut used_words)).collect();
        topics.push(Topic {
            kind: topic_kind(index),
            words,
            direction: random_unit(&mut word_rng),
        });
    }

    let mut posts: Vec<PostSpec> = Vec::with_capacity(2 * SYNTHETIC_TOPICS);
    for (topic_index, topic) in topics.iter().enumerate() {
        for side in 0..2usize {
            let id = format!("post-{:03}", topic_index * 2 + side);
            let mut rng = substream_rng(seed, "synthetic-post", &id);
            let rare: Vec<String> =
                (0..2).map(|_| nonce_word(&mut word_rng, &mut used_words)).collect();

            let n_sentences = match topic.kind {
                TopicKind::Short => 3,
                _ => rng.random_range(11..15),
            };
            let mut body_sentences: Vec<String> = (0..n_sentences)
                .map(|_| sentence(&mut rng, &topic.words, &rare))
                .collect();

            let gt_question = specific_question(&mut rng, &topic.words, &rare[0]);
            let title_is_question = rng.random_bool(0.5);
            let mut title = if title_is_question {
                gt_question.clone()
            } else {
                DECLARATIVE_TITLES[rng.random_range(0..DECLARATIVE_TITLES.len())]
                    .replace("{topic}", &topic.words[0])
            };

            match topic.kind {
                TopicKind::NoQuestions => {
                    if title_is_question {
                        title = DECLARATIVE_TITLES[0].replace("{topic}", &topic.words[0]);
                    }
                }
                TopicKind::GenericOnly => {
                    if title_is_question {
                        title = DECLARATIVE_TITLES[1].replace("{topic}", &topic.words[0]);
                    }
                    body_sentences.push(GENERIC_QUESTIONS[0].to_string());
                    body_sentences.push(GENERIC_QUESTIONS[2].to_string());
                }
                _ => {
                    if !title_is_question {
                        let position = rng.random_range(0..=body_sentences.len());
                        body_sentences.insert(position, gt_question.clone());
                    }
                    // Sometimes a second specific question competes for the
                    // ground-truth slot, sometimes a generic one is stripped.
                    if rng.random_bool(0.3) {
                        let second = specific_question(&mut rng, &topic.words, &rare[1]);
                        body_sentences.push(second);
                    }
                    if rng.random_bool(0.4) {
                        let generic = GENERIC_QUESTIONS[rng.random_range(0..GENERIC_QUESTIONS.len())];
                        body_sentences.push(generic.to_string());
                    }
                }
            }

            let body = if topic.kind == TopicKind::TitleOnlyFirst && side == 0 {
                String::new()
            } else {
                body_sentences.join(" ")
            };
            posts.push(PostSpec {
                id,
                topic: topic_index,
                title,
                body,
                rare,
            });
        }
    }

    // Serialize posts, sprinkling in three junk lines.
    let mut posts_jsonl = String::new();
    for (index, post) in posts.iter().enumerate() {
        if index == 57 {
            posts_jsonl.push_str("{\"title\":\"no id on this line\",\"body\":\"orphan record\"}\n");
        }
        if index == 123 {
            posts_jsonl.push_str("{\"id\":\"post-empty\",\"title\":\"\",\"body\":\"  \"}\n");
        }
        if index == 171 {
            posts_jsonl.push_str("this line is not a record at all\n");
        }
        let line = serde_json::json!({
            "id": post.id,
            "title": post.title,
            "body": post.body,
            "created": 1_500_000_000i64 + index as i64 * 3600,
        });
        posts_jsonl.push_str(&line.to_string());
        posts_jsonl.push('\n');
    }

    let removals_txt = "# authors asked for these posts to be removed\n\
                        post-000\n\
                        post-001\n\
                        post-ghost\n"
        .to_string();

    // Word embeddings: topic words hug their topic direction, rare and
    // filler words point wherever.
    let mut embed_rng = substream_rng(seed, "synthetic", "embeddings");
    let mut embeddings_txt = String::new();
    let write_vector = |out: &mut String, word: &str, vector: &[f64]| {
        out.push_str(word);
        for component in vector {
            let _ = write!(out, " {component:.6}");
        }
        out.push('\n');
    };
    for word in FILLER {
        let vector = perturbed(&random_unit(&mut embed_rng), 0.2, &mut embed_rng);
        write_vector(&mut embeddings_txt, word, &vector);
    }
    for topic in &topics {
        for word in &topic.words {
            let vector = perturbed(&topic.direction, 0.25, &mut embed_rng);
            write_vector(&mut embeddings_txt, word, &vector);
        }
    }
    for post in &posts {
        let topic_direction = &topics[post.topic].direction;
        for word in &post.rare {
            // Rare words lean toward their topic so the masking rule sees
            // informative similarities.
            let mut vector = perturbed(topic_direction, 0.6, &mut embed_rng);
            for component in &mut vector {
                *component *= 0.8;
            }
            write_vector(&mut embeddings_txt, word, &vector);
        }
    }

    // Sentence vectors for each post's candidate ground-truth questions,
    // keyed by post id. Same-topic cosines land inside the keep-window for
    // normal topics and outside it for the degenerate ones.
    let mut vector_rng = substream_rng(seed, "synthetic", "sentence-vectors");
    let mut sentence_vectors_txt = String::new();
    for (topic_index, topic) in topics.iter().enumerate() {
        // Per-component jitter s: two jittered copies of a unit base vector
        // sit near cosine 1/(1 + d*s^2/3), so s in [0.12, 0.19] keeps normal
        // topics inside the [0.8, 0.95] window at d = 16.
        let noise = match topic.kind {
            TopicKind::VectorsTooSimilar => 0.005,
            TopicKind::VectorsOrthogonal => f64::NAN, // orthogonal pair below
            _ => 0.12 + 0.07 * ((topic_index % 7) as f64 / 7.0),
        };
        let first_id = format!("post-{:03}", topic_index * 2);
        let second_id = format!("post-{:03}", topic_index * 2 + 1);
        if topic.kind == TopicKind::VectorsOrthogonal {
            let a = random_unit(&mut vector_rng);
            // Build an orthogonal mate by Gram-Schmidt.
            let mut b = random_unit(&mut vector_rng);
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            for (component, &base) in b.iter_mut().zip(&a) {
                *component -= dot * base;
            }
            write_vector(&mut sentence_vectors_txt, &first_id, &a);
            write_vector(&mut sentence_vectors_txt, &second_id, &b);
            continue;
        }
        let base = random_unit(&mut vector_rng);
        for id in [&first_id, &second_id] {
            if topic.kind == TopicKind::VectorMissingFirst && id == &first_id {
                continue;
            }
            let vector = perturbed(&base, noise, &mut vector_rng);
            write_vector(&mut sentence_vectors_txt, id, &vector);
        }
    }

    SyntheticFiles {
        posts_jsonl,
        removals_txt,
        embeddings_txt,
        sentence_vectors_txt,
    }
}

/// The annotation-analysis fixture: instance labels plus annotation records
/// whose aggregate accuracies and label shares hit fixed reference targets.
#[derive(Debug, Clone)]
pub struct AnnotationFixtureFiles {
    pub instances_jsonl: String,
    pub annotations_csv: String,
}

/// (actual, alternative, instances, of which correctly chosen).
const FIXTURE_CELLS: &[(Plausibility, Plausibility, usize, usize)] = &[
    (Plausibility::L, Plausibility::L, 20, 14),
    (Plausibility::L, Plausibility::U, 40, 40),
    (Plausibility::L, Plausibility::I, 20, 20),
    (Plausibility::L, Plausibility::E, 75, 75),
    (Plausibility::L, Plausibility::G, 7, 7),
    (Plausibility::U, Plausibility::L, 2, 0),
    (Plausibility::U, Plausibility::U, 2, 0),
    (Plausibility::U, Plausibility::I, 8, 8),
    (Plausibility::U, Plausibility::E, 1, 1),
    (Plausibility::U, Plausibility::G, 7, 7),
    (Plausibility::I, Plausibility::L, 4, 4),
    (Plausibility::I, Plausibility::I, 4, 4),
    (Plausibility::I, Plausibility::E, 1, 0),
    (Plausibility::E, Plausibility::L, 2, 0),
    (Plausibility::E, Plausibility::E, 2, 0),
    (Plausibility::G, Plausibility::L, 2, 0),
    (Plausibility::G, Plausibility::E, 2, 0),
    (Plausibility::G, Plausibility::G, 1, 0),
];

/// How many of the 200 fixture instances get a second-annotator pass, and
/// how many of those agree with the first annotator.
const SECOND_ROUND: usize = 75;
const SECOND_ROUND_AGREEMENTS: usize = 68;

pub fn annotation_fixture() -> AnnotationFixtureFiles {
    let mut instances_jsonl = String::new();
    let mut annotations = Vec::new();
    let mut index = 0usize;

    for &(actual, alternative, count, correct) in FIXTURE_CELLS {
        for within in 0..count {
            index += 1;
            let instance_id = format!("ann-{index:03}");
            let label = if index % 2 == 0 { Slot::A } else { Slot::B };
            let is_correct = within < correct;
            let choice = if is_correct {
                label
            } else {
                match label {
                    Slot::A => Slot::B,
                    Slot::B => Slot::A,
                }
            };
            let (question_a, question_b) = match label {
                Slot::A => (
                    format!("What happened with situation {index}?"),
                    format!("How would anyone fix case {index}?"),
                ),
                Slot::B => (
                    format!("How would anyone fix case {index}?"),
                    format!("What happened with situation {index}?"),
                ),
            };
            let instance = ClozeInstance {
                instance_id: instance_id.clone(),
                narrative: format!("Synthetic annotated narrative number {index}."),
                question_a,
                question_b,
                label,
                source_post_id: format!("src-{index:03}"),
                alternative_post_id: format!("alt-{index:03}"),
                diagnostics: InstanceDiagnostics {
                    pair_similarity: 0.5,
                    min_question_narrative_similarity: 0.25,
                    question_pair_similarity: 0.9,
                },
            };
            instances_jsonl.push_str(&serde_json::to_string(&instance).expect("serializable"));
            instances_jsonl.push('\n');
            annotations.push(AnnotationRecord {
                instance_id,
                annotator_id: "a1".to_string(),
                choice,
                plausibility_actual: actual,
                plausibility_alternative: alternative,
            });
        }
    }

    // Second-round annotations over the first 75 instances for agreement
    // statistics; plausibility ratings repeat the first round's.
    let mut second: Vec<AnnotationRecord> = annotations[..SECOND_ROUND]
        .iter()
        .cloned()
        .map(|mut record| {
            record.annotator_id = "a2".to_string();
            record
        })
        .collect();
    for record in second.iter_mut().skip(SECOND_ROUND_AGREEMENTS) {
        record.choice = match record.choice {
            Slot::A => Slot::B,
            Slot::B => Slot::A,
        };
    }
    annotations.extend(second);

    let mut annotations_csv = String::from(
        "instance_id,annotator_id,choice,plausibility_actual,plausibility_alternative\n",
    );
    for record in &annotations {
        let choice = match record.choice {
            Slot::A => "a",
            Slot::B => "b",
        };
        let _ = writeln!(
            annotations_csv,
            "{},{},{},{:?},{:?}",
            record.instance_id,
            record.annotator_id,
            choice,
            record.plausibility_actual,
            record.plausibility_alternative
        );
    }

    AnnotationFixtureFiles {
        instances_jsonl,
        annotations_csv,
    }
}
