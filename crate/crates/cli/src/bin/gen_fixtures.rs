//! Regenerate the bundled fixture data:
//!
//!   data/synthetic/    200-post synthetic benchmark corpus + config
//!   data/annotations/  annotation-analysis fixture + config
//!
//! The synthetic pipeline is run once into a scratch directory to measure
//! how many instances survive, so the emitted config's split sizes always
//! fit the corpus.
//!
//! Usage: gen-fixtures [output_root] [seed]

use std::fs;
use std::path::{Path, PathBuf};

use advice_cloze::pairing::{ClozeInstance, Slot};
use advice_cloze::synthetic::{annotation_fixture, synthetic_corpus};

use advice_cloze_cli::config::PipelineConfig;
use advice_cloze_cli::stages;
use advice_cloze_cli::util::read_jsonl;

const CORPUS_SEED: u64 = 17;

fn synthetic_config_json(seed: u64, stage_dir: &str, split: (usize, usize, usize)) -> String {
    format!(
        r#"{{
  "seed": {seed},
  "paths": {{
    "corpus": "posts.jsonl",
    "removal_list": "removals.txt",
    "embeddings": "embeddings.txt",
    "sentence_vectors": "sentence_vectors.txt",
    "stage_dir": "{stage_dir}"
  }},
  "thresholds": {{
    "specificity": 5.0,
    "min_question_words": 5,
    "narrative_length": [50, 300],
    "pair_similarity": [0.1, 0.8],
    "question_similarity": [0.8, 0.95],
    "min_df": 1,
    "ngram_max": 2,
    "top_k_neighbors": 20,
    "specificity_min_df": 1,
    "specificity_stats_source": "narratives"
  }},
  "diversity": {{
    "dims": 40,
    "k": 12,
    "max_iter": 50,
    "top_keywords": 8,
    "pos_filter": "noun_verb"
  }},
  "baseline": {{
    "learning_rate": 0.1,
    "epochs": 200,
    "l2": 0.0001
  }},
  "split": {{
    "train": {},
    "test": {},
    "heldout": {}
  }}
}}
"#,
        split.0, split.1, split.2
    )
}

fn annotation_config_json() -> &'static str {
    r#"{
  "seed": 0,
  "paths": {
    "annotations": "annotations.csv",
    "stage_dir": "."
  }
}
"#
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(args.next().unwrap_or_else(|| "data".to_string()));
    let seed: u64 = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(CORPUS_SEED);

    let synthetic_dir = root.join("synthetic");
    let files = synthetic_corpus(seed);
    write(&synthetic_dir.join("posts.jsonl"), &files.posts_jsonl)?;
    write(&synthetic_dir.join("removals.txt"), &files.removals_txt)?;
    write(&synthetic_dir.join("embeddings.txt"), &files.embeddings_txt)?;
    write(
        &synthetic_dir.join("sentence_vectors.txt"),
        &files.sentence_vectors_txt,
    )?;

    // Dry-run the construction stages to size the splits.
    let scratch = std::env::temp_dir().join(format!("advice-cloze-gen-{}", std::process::id()));
    fs::create_dir_all(&scratch)?;
    let probe_config_path = scratch.join("config.json");
    fs::write(
        &probe_config_path,
        synthetic_config_json(42, "probe-out", (0, 0, 0)),
    )?;
    // Point the probe at the freshly written synthetic inputs.
    let config = {
        let raw = fs::read_to_string(&probe_config_path)?;
        let mut value: serde_json::Value = serde_json::from_str(&raw)?;
        let absolute_dir = fs::canonicalize(&synthetic_dir)?;
        let paths = value["paths"].as_object_mut().expect("paths object");
        for key in ["corpus", "removal_list", "embeddings", "sentence_vectors"] {
            let file = paths[key].as_str().expect("path string").to_string();
            paths[key] = serde_json::Value::String(
                absolute_dir.join(file).to_string_lossy().into_owned(),
            );
        }
        fs::write(&probe_config_path, serde_json::to_string(&value)?)?;
        PipelineConfig::load(&probe_config_path, None, Some(scratch.join("out")))
            .map_err(|e| anyhow::anyhow!("probe config: {e}"))?
    };
    let run = |stage| {
        stages::run_stage(stage, &config).map_err(|e| anyhow::anyhow!("probe {:?}: {e}", stage))
    };
    run(stages::StageName::Ingest)?;
    run(stages::StageName::Extract)?;
    run(stages::StageName::Pair)?;
    run(stages::StageName::Build)?;

    let instances: Vec<ClozeInstance> =
        read_jsonl(&config.artifact(stages::INSTANCES_FILE)).map_err(|e| anyhow::anyhow!("{e}"))?;
    let n = instances.len();
    let label_a = instances.iter().filter(|i| i.label == Slot::A).count();
    let fraction = label_a as f64 / n as f64;
    println!("probe: {n} instances, label-a fraction {fraction:.4}");
    fs::remove_dir_all(&scratch)?;

    // The slot coin for an instance is the first draw of the
    // (seed, "assemble", instance_id) substream, so the realized label
    // balance per pipeline seed is computable without rerunning the
    // pipeline. Pick the candidate seed whose balance sits closest to the
    // fair-coin expectation.
    let pipeline_seed = {
        use advice_cloze::seeding::substream_coin;
        let mut best = (f64::INFINITY, 42u64);
        for seed in 1..=64u64 {
            let heads = instances
                .iter()
                .filter(|i| substream_coin(seed, "assemble", &i.instance_id))
                .count();
            let gap = (heads as f64 / n as f64 - 0.5).abs();
            if gap < best.0 {
                best = (gap, seed);
            }
        }
        println!(
            "pipeline seed {} picked: label balance within {:.4} of 0.5",
            best.1, best.0
        );
        best.1
    };

    // 45% train, 20% test, the rest held out.
    let train = n * 45 / 100;
    let test = n * 20 / 100;
    let heldout = n - train - test;
    write(
        &synthetic_dir.join("config.json"),
        &synthetic_config_json(pipeline_seed, "out", (train, test, heldout)),
    )?;

    let annotations_dir = root.join("annotations");
    let fixture = annotation_fixture();
    write(&annotations_dir.join("instances.jsonl"), &fixture.instances_jsonl)?;
    write(&annotations_dir.join("annotations.csv"), &fixture.annotations_csv)?;
    write(&annotations_dir.join("config.json"), annotation_config_json())?;
    Ok(())
}
