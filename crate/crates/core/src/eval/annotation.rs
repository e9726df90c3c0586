//! Human annotation analysis: plausibility taxonomy, Cohen's kappa, label
//! distributions, and accuracy breakdown by question pair type.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::pairing::Slot;

/// How plausible a candidate question is for a narrative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Plausibility {
    /// Compatible and likely.
    L,
    /// Compatible but unlikely.
    U,
    /// Implicitly incompatible.
    I,
    /// Explicitly incompatible.
    E,
    /// Very general.
    G,
}

impl Plausibility {
    pub const ALL: [Plausibility; 5] = [
        Plausibility::L,
        Plausibility::U,
        Plausibility::I,
        Plausibility::E,
        Plausibility::G,
    ];

    /// Compatible means neither explicitly nor implicitly incompatible.
    pub fn is_compatible(self) -> bool {
        matches!(self, Plausibility::L | Plausibility::U)
    }

    pub fn describe(self) -> &'static str {
        match self {
            Plausibility::L => "compatible and likely",
            Plausibility::U => "compatible but unlikely",
            Plausibility::I => "incompatible (implicit)",
            Plausibility::E => "incompatible (explicit)",
            Plausibility::G => "very general",
        }
    }
}

/// One annotator's judgment of one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub instance_id: String,
    pub annotator_id: String,
    pub choice: Slot,
    pub plausibility_actual: Plausibility,
    pub plausibility_alternative: Plausibility,
}

/// Read the annotation CSV (header: instance_id, annotator_id, choice,
/// plausibility_actual, plausibility_alternative).
pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationRecord>, EvalError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| EvalError::AnnotationCsv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut records = Vec::new();
    for (index, row) in reader.deserialize::<AnnotationRecord>().enumerate() {
        let record = row.map_err(|e| EvalError::AnnotationCsv {
            path: path.to_path_buf(),
            reason: format!("record {}: {e}", index + 1),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Chance-corrected agreement between two equally long label sequences.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut marginal_a: BTreeMap<&T, f64> = BTreeMap::new();
    let mut marginal_b: BTreeMap<&T, f64> = BTreeMap::new();
    for label in a {
        *marginal_a.entry(label).or_insert(0.0) += 1.0;
    }
    for label in b {
        *marginal_b.entry(label).or_insert(0.0) += 1.0;
    }
    let expected: f64 = marginal_a
        .iter()
        .filter_map(|(label, count_a)| marginal_b.get(label).map(|count_b| count_a * count_b))
        .sum::<f64>()
        / (n * n);
    if (1.0 - expected).abs() < 1e-15 {
        // Both raters used a single shared label; agreement is total.
        return if (observed - 1.0).abs() < 1e-15 {
            Ok(1.0)
        } else {
            Err(EvalError::DegenerateAgreement)
        };
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// Share of each plausibility label among actual and alternative questions,
/// over the first annotation per instance.
#[derive(Debug, Clone, Serialize)]
pub struct LabelDistribution {
    pub n: usize,
    pub actual: BTreeMap<Plausibility, usize>,
    pub alternative: BTreeMap<Plausibility, usize>,
}

impl LabelDistribution {
    /// Percentage (0-100, rounded half away from zero) for a label.
    pub fn percent(count: usize, n: usize) -> i64 {
        if n == 0 {
            return 0;
        }
        (count as f64 / n as f64 * 100.0).round() as i64
    }
}

/// First annotation per instance, in file order.
pub fn first_per_instance(records: &[AnnotationRecord]) -> Vec<&AnnotationRecord> {
    let mut seen = std::collections::BTreeSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.instance_id.as_str()))
        .collect()
}

pub fn label_distribution(records: &[AnnotationRecord]) -> LabelDistribution {
    let firsts = first_per_instance(records);
    let mut actual: BTreeMap<Plausibility, usize> = BTreeMap::new();
    let mut alternative: BTreeMap<Plausibility, usize> = BTreeMap::new();
    for record in &firsts {
        *actual.entry(record.plausibility_actual).or_insert(0) += 1;
        *alternative.entry(record.plausibility_alternative).or_insert(0) += 1;
    }
    LabelDistribution {
        n: firsts.len(),
        actual,
        alternative,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BucketStats {
    pub n: usize,
    pub correct: usize,
}

impl BucketStats {
    pub fn accuracy(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.correct as f64 / self.n as f64
        }
    }

    fn add(&mut self, correct: bool) {
        self.n += 1;
        if correct {
            self.correct += 1;
        }
    }
}

/// One of the aggregate pair-type rows.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub name: String,
    pub stats: BucketStats,
    /// Bucket size over all annotated instances.
    pub share_of_data: f64,
}

/// Accuracy broken down by (actual, alternative) plausibility pair.
#[derive(Debug, Clone, Serialize)]
pub struct PairTypeBreakdown {
    /// Full partition into plausibility cells.
    pub cells: BTreeMap<(Plausibility, Plausibility), BucketStats>,
    /// The overlapping aggregate rows: C+E, C+{C,I}, C+C, L+{U,I}.
    pub aggregates: Vec<AggregateRow>,
    pub overall: BucketStats,
    /// Annotations referencing instances absent from the label map.
    pub skipped_unknown: usize,
}

/// Bucket instances by their annotated pair type and score `predictions`
/// against `labels` within each bucket. One annotation per instance (first
/// in file order) defines the pair type; predictions may come from a model
/// or from the annotators' own choices.
pub fn pair_type_breakdown(
    annotations: &[AnnotationRecord],
    predictions: &BTreeMap<String, Slot>,
    labels: &BTreeMap<String, Slot>,
) -> PairTypeBreakdown {
    let mut cells: BTreeMap<(Plausibility, Plausibility), BucketStats> = BTreeMap::new();
    let mut overall = BucketStats::default();
    let mut skipped_unknown = 0;

    struct Item {
        pair: (Plausibility, Plausibility),
        correct: bool,
    }
    let mut items: Vec<Item> = Vec::new();
    for record in first_per_instance(annotations) {
        let (Some(label), Some(prediction)) = (
            labels.get(&record.instance_id),
            predictions.get(&record.instance_id),
        ) else {
            skipped_unknown += 1;
            continue;
        };
        let correct = prediction == label;
        let pair = (record.plausibility_actual, record.plausibility_alternative);
        cells.entry(pair).or_default().add(correct);
        overall.add(correct);
        items.push(Item { pair, correct });
    }

    let aggregate = |name: &str, accept: &dyn Fn(Plausibility, Plausibility) -> bool| {
        let mut stats = BucketStats::default();
        for item in &items {
            if accept(item.pair.0, item.pair.1) {
                stats.add(item.correct);
            }
        }
        AggregateRow {
            name: name.to_string(),
            stats,
            share_of_data: if overall.n == 0 {
                0.0
            } else {
                stats.n as f64 / overall.n as f64
            },
        }
    };
    let aggregates = vec![
        aggregate("C + E", &|actual, alt| {
            actual.is_compatible() && alt == Plausibility::E
        }),
        aggregate("C + {C, I}", &|actual, alt| {
            actual.is_compatible() && (alt.is_compatible() || alt == Plausibility::I)
        }),
        aggregate("C + C", &|actual, alt| {
            actual.is_compatible() && alt.is_compatible()
        }),
        aggregate("L + {U, I}", &|actual, alt| {
            actual == Plausibility::L && (alt == Plausibility::U || alt == Plausibility::I)
        }),
    ];

    PairTypeBreakdown {
        cells,
        aggregates,
        overall,
        skipped_unknown,
    }
}

impl PairTypeBreakdown {
    /// Size-weighted mean accuracy over the full cell partition; equals the
    /// overall accuracy by construction.
    pub fn weighted_cell_accuracy(&self) -> f64 {
        let total: usize = self.cells.values().map(|s| s.n).sum();
        if total == 0 {
            return 0.0;
        }
        let weighted: f64 = self
            .cells
            .values()
            .map(|s| s.accuracy() * s.n as f64)
            .sum();
        weighted / total as f64
    }
}
