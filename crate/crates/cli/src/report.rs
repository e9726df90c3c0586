//! The `report` stage: render pipeline counts, annotation analysis, and
//! model evaluation into a text report plus machine-readable CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use advice_cloze::eval::{
    cohen_kappa, first_per_instance, label_distribution, pair_type_breakdown, read_annotations,
    AnnotationRecord, PairTypeBreakdown, Plausibility,
};
use advice_cloze::pairing::{ClozeInstance, Slot};

use crate::config::PipelineConfig;
use crate::counts::StageCounts;
use crate::stages::{
    require_artifact, EvalArtifact, COUNTS_FILE, EVAL_JSON_FILE, INSTANCES_FILE, PREDICTIONS_FILE,
};
use crate::util::{percent, read_jsonl, write_atomic};
use crate::StageError;

pub const REPORT_FILE: &str = "report.txt";
pub const BREAKDOWN_FILE: &str = "breakdown.csv";
pub const DISTRIBUTION_FILE: &str = "label_distribution.csv";

struct AnnotationAnalysis {
    records: Vec<AnnotationRecord>,
    human: PairTypeBreakdown,
    model: Option<PairTypeBreakdown>,
    distribution: advice_cloze::eval::LabelDistribution,
    kappa_rows: Vec<(String, String, usize, f64)>,
}

fn load_predictions(path: &Path) -> Result<BTreeMap<String, Slot>, StageError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| StageError::failure(format!("report: cannot read {}: {e}", path.display())))?;
    let mut predictions = BTreeMap::new();
    for row in reader.records() {
        let row =
            row.map_err(|e| StageError::failure(format!("report: bad predictions row: {e}")))?;
        let slot = match &row[3] {
            "a" => Slot::A,
            "b" => Slot::B,
            other => {
                return Err(StageError::failure(format!(
                    "report: bad predicted slot {other:?}"
                )))
            }
        };
        predictions.insert(row[0].to_string(), slot);
    }
    Ok(predictions)
}

fn annotator_agreement(records: &[AnnotationRecord]) -> Vec<(String, String, usize, f64)> {
    let mut by_annotator: BTreeMap<&str, BTreeMap<&str, Slot>> = BTreeMap::new();
    for record in records {
        by_annotator
            .entry(record.annotator_id.as_str())
            .or_default()
            .insert(record.instance_id.as_str(), record.choice);
    }
    let annotators: Vec<&str> = by_annotator.keys().copied().collect();
    let mut rows = Vec::new();
    for (index, first) in annotators.iter().enumerate() {
        for second in &annotators[index + 1..] {
            let choices_first = &by_annotator[first];
            let choices_second = &by_annotator[second];
            let shared: Vec<&str> = choices_first
                .keys()
                .filter(|id| choices_second.contains_key(**id))
                .copied()
                .collect();
            if shared.len() < 2 {
                continue;
            }
            let a: Vec<Slot> = shared.iter().map(|id| choices_first[id]).collect();
            let b: Vec<Slot> = shared.iter().map(|id| choices_second[id]).collect();
            if let Ok(kappa) = cohen_kappa(&a, &b) {
                rows.push((first.to_string(), second.to_string(), shared.len(), kappa));
            }
        }
    }
    rows
}

fn analyze_annotations(
    config: &PipelineConfig,
    annotations_path: &Path,
) -> Result<AnnotationAnalysis, StageError> {
    if !annotations_path.exists() {
        return Err(StageError::Config(format!(
            "paths.annotations = {} is not readable",
            annotations_path.display()
        )));
    }
    let records = read_annotations(annotations_path)
        .map_err(|e| StageError::failure(format!("report: {e}")))?;

    let instances_path = require_artifact(config, INSTANCES_FILE, "build")?;
    let instances: Vec<ClozeInstance> = read_jsonl(&instances_path)?;
    let labels: BTreeMap<String, Slot> = instances
        .iter()
        .map(|i| (i.instance_id.clone(), i.label))
        .collect();

    // The human "prediction" for an instance is its first annotator's choice.
    let human_choices: BTreeMap<String, Slot> = first_per_instance(&records)
        .into_iter()
        .map(|r| (r.instance_id.clone(), r.choice))
        .collect();
    let human = pair_type_breakdown(&records, &human_choices, &labels);

    let predictions_path = config.artifact(PREDICTIONS_FILE);
    let model = if predictions_path.exists() {
        let predictions = load_predictions(&predictions_path)?;
        Some(pair_type_breakdown(&records, &predictions, &labels))
    } else {
        None
    };

    Ok(AnnotationAnalysis {
        distribution: label_distribution(&records),
        kappa_rows: annotator_agreement(&records),
        records,
        human,
        model,
    })
}

fn render_counts(out: &mut String, counts: &StageCounts) {
    if counts.rows().is_empty() {
        return;
    }
    let _ = writeln!(out, "== pipeline counts ==");
    let _ = writeln!(out, "{:<10} {:<30} {:>10}", "stage", "metric", "count");
    for (stage, metric, count) in counts.rows() {
        let _ = writeln!(out, "{stage:<10} {metric:<30} {count:>10}");
    }
    let _ = writeln!(out);
}

fn render_breakdown(out: &mut String, title: &str, breakdown: &PairTypeBreakdown) {
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{:<12} {:>9} {:>7}", "pair type", "accuracy", "share");
    for row in &breakdown.aggregates {
        let _ = writeln!(
            out,
            "{:<12} {:>8}% {:>6}%",
            row.name,
            percent(row.stats.accuracy()),
            percent(row.share_of_data)
        );
    }
    let _ = writeln!(
        out,
        "{:<12} {:>8}%",
        "overall",
        percent(breakdown.overall.accuracy())
    );
}

fn render_annotation_section(out: &mut String, analysis: &AnnotationAnalysis) {
    let annotators: std::collections::BTreeSet<&str> = analysis
        .records
        .iter()
        .map(|r| r.annotator_id.as_str())
        .collect();
    let _ = writeln!(out, "== annotation analysis ==");
    let _ = writeln!(
        out,
        "instances annotated: {} (records: {}, annotators: {}, unknown instances skipped: {})",
        analysis.human.overall.n,
        analysis.records.len(),
        annotators.len(),
        analysis.human.skipped_unknown
    );
    let _ = writeln!(
        out,
        "human accuracy: {}% ({}/{})",
        percent(analysis.human.overall.accuracy()),
        analysis.human.overall.correct,
        analysis.human.overall.n
    );
    let _ = writeln!(out);
    render_breakdown(out, "human choices by pair type", &analysis.human);
    let _ = writeln!(out);

    let _ = writeln!(out, "label distribution (% of first-round judgments)");
    let _ = writeln!(out, "{:<26} {:>7} {:>12}", "category", "actual", "alternative");
    let n = analysis.distribution.n;
    for label in Plausibility::ALL {
        let actual = analysis.distribution.actual.get(&label).copied().unwrap_or(0);
        let alternative = analysis
            .distribution
            .alternative
            .get(&label)
            .copied()
            .unwrap_or(0);
        let _ = writeln!(
            out,
            "{:<26} {:>6}% {:>11}%",
            label.describe(),
            advice_cloze::eval::LabelDistribution::percent(actual, n),
            advice_cloze::eval::LabelDistribution::percent(alternative, n)
        );
    }
    let _ = writeln!(out);

    if !analysis.kappa_rows.is_empty() {
        let _ = writeln!(out, "annotator agreement");
        for (first, second, shared, kappa) in &analysis.kappa_rows {
            let _ = writeln!(
                out,
                "{first} vs {second}: kappa = {kappa:.3} over {shared} shared instances"
            );
        }
        let _ = writeln!(out);
    }

    if let Some(model) = &analysis.model {
        render_breakdown(out, "model predictions by pair type", model);
        let _ = writeln!(out);
    }
}

fn render_eval_section(out: &mut String, eval: &EvalArtifact) {
    let _ = writeln!(out, "== model evaluation ==");
    for (name, accuracy) in [
        ("train", &eval.train),
        ("test", &eval.test),
        ("heldout", &eval.heldout),
    ] {
        if let Some(a) = accuracy {
            let _ = writeln!(
                out,
                "{name}: accuracy {:.3} ({}/{}, ties {})",
                a.accuracy, a.correct, a.n, a.ties
            );
        }
    }
    if let (Some(split), Some(c)) = (&eval.concreteness_split, &eval.concreteness) {
        let _ = writeln!(
            out,
            "concreteness ({split}): mean question idf {:.4} when correct vs {:.4} when wrong \
             (t = {:.3}, p = {:.4})",
            c.mean_idf_correct, c.mean_idf_incorrect, c.t_statistic, c.p_value
        );
        let leading: Vec<String> = c
            .by_interrogative
            .iter()
            .take(8)
            .map(|row| format!("{} {:.2} (n={})", row.word, row.accuracy, row.n))
            .collect();
        let _ = writeln!(out, "accuracy by leading interrogative: {}", leading.join(", "));
    }
    let _ = writeln!(out);
}

fn breakdown_csv(analysis: &AnnotationAnalysis) -> String {
    let mut out = String::from("pair_type,n,share_pct,human_accuracy_pct,model_accuracy_pct\n");
    let model_rows: BTreeMap<&str, i64> = analysis
        .model
        .as_ref()
        .map(|m| {
            m.aggregates
                .iter()
                .map(|row| (row.name.as_str(), percent(row.stats.accuracy())))
                .collect()
        })
        .unwrap_or_default();
    for row in &analysis.human.aggregates {
        let model_cell = model_rows
            .get(row.name.as_str())
            .map(|p| p.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.name.replace(',', ";"),
            row.stats.n,
            percent(row.share_of_data),
            percent(row.stats.accuracy()),
            model_cell
        ));
    }
    let overall_model = analysis
        .model
        .as_ref()
        .map(|m| percent(m.overall.accuracy()).to_string())
        .unwrap_or_default();
    out.push_str(&format!(
        "overall,{},100,{},{}\n",
        analysis.human.overall.n,
        percent(analysis.human.overall.accuracy()),
        overall_model
    ));
    out
}

fn distribution_csv(analysis: &AnnotationAnalysis) -> String {
    let mut out = String::from("code,category,actual_pct,alternative_pct\n");
    let n = analysis.distribution.n;
    for label in Plausibility::ALL {
        let actual = analysis.distribution.actual.get(&label).copied().unwrap_or(0);
        let alternative = analysis
            .distribution
            .alternative
            .get(&label)
            .copied()
            .unwrap_or(0);
        out.push_str(&format!(
            "{:?},{},{},{}\n",
            label,
            label.describe(),
            advice_cloze::eval::LabelDistribution::percent(actual, n),
            advice_cloze::eval::LabelDistribution::percent(alternative, n)
        ));
    }
    out
}

pub fn run_report(config: &PipelineConfig) -> Result<(), StageError> {
    let mut out = String::new();
    let counts = StageCounts::load(&config.artifact(COUNTS_FILE))?;
    render_counts(&mut out, &counts);

    let analysis = match &config.paths.annotations {
        Some(path) => Some(analyze_annotations(config, path)?),
        None => {
            let _ = writeln!(out, "(no annotation file configured)");
            let _ = writeln!(out);
            None
        }
    };
    if let Some(analysis) = &analysis {
        render_annotation_section(&mut out, analysis);
    }

    let eval_path = config.artifact(EVAL_JSON_FILE);
    if eval_path.exists() {
        let raw = std::fs::read_to_string(&eval_path)
            .map_err(|e| StageError::failure(format!("report: {e}")))?;
        let eval: EvalArtifact = serde_json::from_str(&raw)
            .map_err(|e| StageError::failure(format!("report: bad eval file: {e}")))?;
        render_eval_section(&mut out, &eval);
    }

    write_atomic(&config.artifact(REPORT_FILE), out.as_bytes())?;
    if let Some(analysis) = &analysis {
        write_atomic(
            &config.artifact(BREAKDOWN_FILE),
            breakdown_csv(analysis).as_bytes(),
        )?;
        write_atomic(
            &config.artifact(DISTRIBUTION_FILE),
            distribution_csv(analysis).as_bytes(),
        )?;
    }
    print!("{out}");
    Ok(())
}
