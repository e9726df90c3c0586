//! The narrative-question similarity choice model.
//!
//! A logistic regression over the difference of the two candidates' feature
//! vectors. The bias is structurally fixed at zero, so swapping the two
//! presentation slots complements the predicted probability exactly and the
//! model cannot learn a slot preference.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::EvalError;
use crate::pairing::Slot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for TrainingMeta {
    fn default() -> Self {
        Self {
            seed: 0,
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceModel {
    pub weights: [f64; 4],
    /// Always zero; serialized so model files are self-describing.
    pub bias: f64,
    pub training_meta: TrainingMeta,
}

impl ChoiceModel {
    pub fn zero() -> Self {
        Self {
            weights: [0.0; 4],
            bias: 0.0,
            training_meta: TrainingMeta::default(),
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Probability that slot a holds the actual question:
/// sigma(w . (f_a - f_b)). Antisymmetric in the two slots.
pub fn score_difference(model: &ChoiceModel, features_a: &FeatureVector, features_b: &FeatureVector) -> f64 {
    let diff = features_a.difference(features_b);
    let z: f64 = model.weights.iter().zip(&diff).map(|(w, d)| w * d).sum();
    sigmoid(z)
}

/// Predicted slot plus whether the score sat exactly on the 0.5 tie point
/// (ties resolve to slot a and are counted by the caller).
pub fn predict(model: &ChoiceModel, features_a: &FeatureVector, features_b: &FeatureVector) -> (Slot, bool) {
    let p = score_difference(model, features_a, features_b);
    if p > 0.5 {
        (Slot::A, false)
    } else if p < 0.5 {
        (Slot::B, false)
    } else {
        (Slot::A, true)
    }
}

/// One labeled instance ready for training or evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LabeledFeatures {
    pub features_a: FeatureVector,
    pub features_b: FeatureVector,
    pub label: Slot,
}

/// Mean logistic loss and its gradient for weights over difference features,
/// with an L2 term (l2/2 * ||w||^2).
pub fn loss_and_gradient(
    weights: &[f64; 4],
    examples: &[LabeledFeatures],
    l2: f64,
) -> (f64, [f64; 4]) {
    let n = examples.len() as f64;
    let mut loss = 0.0;
    let mut gradient = [0.0; 4];
    for example in examples {
        let diff = example.features_a.difference(&example.features_b);
        let z: f64 = weights.iter().zip(&diff).map(|(w, d)| w * d).sum();
        let y = if example.label == Slot::A { 1.0 } else { 0.0 };
        // -y ln sigma(z) - (1-y) ln(1 - sigma(z))
        loss += y * softplus(-z) + (1.0 - y) * softplus(z);
        let residual = sigmoid(z) - y;
        for (g, d) in gradient.iter_mut().zip(&diff) {
            *g += residual * d;
        }
    }
    loss /= n;
    for g in gradient.iter_mut() {
        *g /= n;
    }
    let mut penalty = 0.0;
    for (g, w) in gradient.iter_mut().zip(weights) {
        penalty += w * w;
        *g += l2 * w;
    }
    (loss + 0.5 * l2 * penalty, gradient)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ChoiceModel,
    /// Loss after each epoch, starting with the untrained loss.
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
    /// Times the learning rate was halved after a step raised the loss.
    pub rate_halvings: usize,
}

/// Full-batch gradient descent from zero weights. A step that would raise
/// the loss is undone and retried at half the rate, so the loss trace is
/// non-increasing.
pub fn train_choice_model(
    examples: &[LabeledFeatures],
    meta: TrainingMeta,
) -> Result<TrainOutcome, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut weights = [0.0; 4];
    let mut rate = meta.learning_rate;
    let mut rate_halvings = 0;
    let (mut current_loss, mut gradient) = loss_and_gradient(&weights, examples, meta.l2);
    let mut loss_trace = vec![current_loss];

    for _ in 0..meta.epochs {
        let stepped = loop {
            let candidate = [
                weights[0] - rate * gradient[0],
                weights[1] - rate * gradient[1],
                weights[2] - rate * gradient[2],
                weights[3] - rate * gradient[3],
            ];
            let (loss, grad) = loss_and_gradient(&candidate, examples, meta.l2);
            if loss <= current_loss || rate < 1e-12 {
                break (candidate, loss, grad);
            }
            rate /= 2.0;
            rate_halvings += 1;
        };
        weights = stepped.0;
        current_loss = stepped.1;
        gradient = stepped.2;
        loss_trace.push(current_loss);
    }

    Ok(TrainOutcome {
        model: ChoiceModel {
            weights,
            bias: 0.0,
            training_meta: TrainingMeta { learning_rate: rate, ..meta },
        },
        final_loss: current_loss,
        loss_trace,
        rate_halvings,
    })
}

/// Seeded shuffle followed by contiguous slicing into train/test/held-out.
pub fn split_dataset<T: Clone>(
    items: &[T],
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>), EvalError> {
    let requested = sizes.0 + sizes.1 + sizes.2;
    if requested > items.len() {
        return Err(EvalError::SplitTooLarge {
            requested,
            available: items.len(),
        });
    }
    let mut indices: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let take = |range: std::ops::Range<usize>| -> Vec<T> {
        indices[range].iter().map(|&i| items[i].clone()).collect()
    };
    let train = take(0..sizes.0);
    let test = take(sizes.0..sizes.0 + sizes.1);
    let heldout = take(sizes.0 + sizes.1..requested);
    Ok((train, test, heldout))
}

/// Accuracy over a labeled set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub n: usize,
    pub correct: usize,
    /// Scores that sat exactly on 0.5 and were tie-broken to slot a.
    pub ties: usize,
    pub accuracy: f64,
}

pub fn evaluate(examples: &[LabeledFeatures], model: &ChoiceModel) -> Result<Accuracy, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut correct = 0;
    let mut ties = 0;
    for example in examples {
        let (slot, tie) = predict(model, &example.features_a, &example.features_b);
        if tie {
            ties += 1;
        }
        if slot == example.label {
            correct += 1;
        }
    }
    Ok(Accuracy {
        n: examples.len(),
        correct,
        ties,
        accuracy: correct as f64 / examples.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn features(values: [f64; 4]) -> FeatureVector {
        FeatureVector {
            tfidf_cos: values[0],
            weighted_embed_cos: values[1],
            mean_embed_cos: values[2],
            content_overlap: values[3],
        }
    }

    fn example(a: [f64; 4], b: [f64; 4], label: Slot) -> LabeledFeatures {
        LabeledFeatures {
            features_a: features(a),
            features_b: features(b),
            label,
        }
    }

    #[test]
    fn identical_slots_score_half() {
        let model = ChoiceModel {
            weights: [0.3, -0.2, 1.0, 0.7],
            ..ChoiceModel::zero()
        };
        let f = features([0.4, 0.1, 0.9, 0.2]);
        assert_eq!(score_difference(&model, &f, &f), 0.5);
    }

    #[test]
    fn zero_model_scores_half_everywhere() {
        let model = ChoiceModel::zero();
        let fa = features([0.9, 0.8, 0.7, 1.0]);
        let fb = features([0.1, 0.0, 0.2, 0.0]);
        assert_eq!(score_difference(&model, &fa, &fb), 0.5);
        let (slot, tie) = predict(&model, &fa, &fb);
        assert_eq!(slot, Slot::A);
        assert!(tie);
    }

    #[test]
    fn swapping_slots_complements_the_probability() {
        let model = ChoiceModel {
            weights: [1.2, -0.4, 0.3, 2.0],
            ..ChoiceModel::zero()
        };
        let fa = features([0.9, 0.2, 0.7, 0.5]);
        let fb = features([0.3, 0.8, 0.1, 0.0]);
        let p = score_difference(&model, &fa, &fb);
        let q = score_difference(&model, &fb, &fa);
        assert!((p + q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separable_toy_set_trains_to_high_accuracy() {
        // Slot a correct whenever its tfidf cosine is higher.
        let examples = vec![
            example([0.9, 0.5, 0.5, 1.0], [0.1, 0.5, 0.5, 0.0], Slot::A),
            example([0.2, 0.5, 0.5, 0.0], [0.8, 0.5, 0.5, 1.0], Slot::B),
        ];
        let outcome = train_choice_model(
            &examples,
            TrainingMeta {
                epochs: 500,
                learning_rate: 1.0,
                l2: 0.0,
                seed: 0,
            },
        )
        .unwrap();
        let accuracy = evaluate(&examples, &outcome.model).unwrap();
        assert_eq!(accuracy.correct, 2);
        assert!(outcome.final_loss < 0.2);
    }

    #[test]
    fn loss_trace_never_increases() {
        let examples = vec![
            example([0.9, 0.1, 0.4, 1.0], [0.2, 0.9, 0.1, 0.0], Slot::A),
            example([0.1, 0.9, 0.2, 0.0], [0.7, 0.3, 0.8, 1.0], Slot::B),
            example([0.5, 0.6, 0.9, 0.5], [0.5, 0.2, 0.3, 0.5], Slot::A),
        ];
        // Deliberately oversized learning rate; halve-on-increase keeps the
        // trace monotone anyway.
        let outcome = train_choice_model(
            &examples,
            TrainingMeta {
                epochs: 100,
                learning_rate: 64.0,
                l2: 1e-4,
                seed: 0,
            },
        )
        .unwrap();
        for window in outcome.loss_trace.windows(2) {
            assert!(window[1] <= window[0] + 1e-15);
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..25 {
            let examples: Vec<LabeledFeatures> = (0..6)
                .map(|_| {
                    let a = [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(0.0..1.0),
                    ];
                    let b = [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(0.0..1.0),
                    ];
                    let label = if rng.random_bool(0.5) { Slot::A } else { Slot::B };
                    example(a, b, label)
                })
                .collect();
            let weights = [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ];
            let l2 = 1e-3;
            let (_, gradient) = loss_and_gradient(&weights, &examples, l2);
            let epsilon = 1e-5;
            for axis in 0..4 {
                let mut plus = weights;
                plus[axis] += epsilon;
                let mut minus = weights;
                minus[axis] -= epsilon;
                let (loss_plus, _) = loss_and_gradient(&plus, &examples, l2);
                let (loss_minus, _) = loss_and_gradient(&minus, &examples, l2);
                let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
                let denom = gradient[axis].abs().max(numeric.abs()).max(1e-8);
                assert!(
                    (gradient[axis] - numeric).abs() / denom < 1e-4,
                    "axis {axis}: analytic {} vs numeric {numeric}",
                    gradient[axis]
                );
            }
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let items: Vec<usize> = (0..100).collect();
        let (train, test, heldout) = split_dataset(&items, (60, 20, 15), 5).unwrap();
        assert_eq!((train.len(), test.len(), heldout.len()), (60, 20, 15));
        // Disjoint.
        let mut all: Vec<usize> = train.iter().chain(&test).chain(&heldout).copied().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 95);
        // Same seed reproduces, different seed permutes.
        let again = split_dataset(&items, (60, 20, 15), 5).unwrap();
        assert_eq!(again.0, train);
        let other = split_dataset(&items, (60, 20, 15), 6).unwrap();
        assert_ne!(other.0, train);
    }

    #[test]
    fn oversized_split_is_an_error() {
        let items: Vec<usize> = (0..10).collect();
        assert!(matches!(
            split_dataset(&items, (8, 2, 1), 0),
            Err(EvalError::SplitTooLarge { .. })
        ));
    }

    #[test]
    fn large_split_sizes_are_exact() {
        let items: Vec<usize> = (0..21_865).collect();
        let (train, test, heldout) = split_dataset(&items, (8_865, 2_500, 10_000), 1).unwrap();
        assert_eq!((train.len(), test.len(), heldout.len()), (8_865, 2_500, 10_000));
        // 500 instances stay unassigned with these sizes.
        assert_eq!(items.len() - train.len() - test.len() - heldout.len(), 500);
    }

    proptest! {
        // Prediction under swapped slots is always the complementary choice.
        #[test]
        fn prediction_antisymmetry(
            w in proptest::array::uniform4(-3.0f64..3.0),
            a in proptest::array::uniform4(-1.0f64..1.0),
            b in proptest::array::uniform4(-1.0f64..1.0),
        ) {
            let model = ChoiceModel { weights: w, ..ChoiceModel::zero() };
            let fa = features(a);
            let fb = features(b);
            let p = score_difference(&model, &fa, &fb);
            let q = score_difference(&model, &fb, &fa);
            prop_assert!((p + q - 1.0).abs() < 1e-12);
        }

        // Scaling features by c > 0 and weights by 1/c preserves the ranking.
        #[test]
        fn ranking_is_scale_invariant(
            w in proptest::array::uniform4(-3.0f64..3.0),
            a in proptest::array::uniform4(-1.0f64..1.0),
            b in proptest::array::uniform4(-1.0f64..1.0),
            c in 0.01f64..100.0,
        ) {
            let model = ChoiceModel { weights: w, ..ChoiceModel::zero() };
            let scaled_model = ChoiceModel {
                weights: [w[0] / c, w[1] / c, w[2] / c, w[3] / c],
                ..ChoiceModel::zero()
            };
            let scale = |v: [f64; 4]| [v[0] * c, v[1] * c, v[2] * c, v[3] * c];
            let (slot, _) = predict(&model, &features(a), &features(b));
            let (scaled_slot, _) = predict(&scaled_model, &features(scale(a)), &features(scale(b)));
            prop_assert_eq!(slot, scaled_slot);
        }
    }
}
