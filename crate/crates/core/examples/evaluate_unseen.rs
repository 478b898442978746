//! Table of top-k accuracy for both methods on all test targets and on the
//! targets whose POI never occurred in training.
//!
//! ```text
//! cargo run --release --example evaluate_unseen -- [output-dir]
//! ```

use nextpoi::classifier::TrainConfig;
use nextpoi::data::temporal_split;
use nextpoi::encoder::EncoderConfig;
use nextpoi::eval::{emit_report, table_text, RunResults, SplitSummary};
use nextpoi::pipeline::{ExperimentConfig, TrainedMethods};
use nextpoi::synthetic::{generate, SyntheticConfig};

fn main() -> anyhow::Result<()> {
    let data = generate(&SyntheticConfig::churn())?;
    let histories = data.histories();
    let choice = nextpoi::data::find_threshold_for_unseen_ratio(&histories, 0.8)?;
    let split = temporal_split(&histories, choice.threshold, 11)?;

    let mut config = ExperimentConfig {
        train: TrainConfig {
            encoder: EncoderConfig {
                window_length: 10,
                hidden_dim: 32,
                poi_embed_dim: 16,
                category_embed_dim: 8,
                temporal_embed_dim: 8,
                num_attention_heads: 2,
                num_layers: 1,
                neighbor_count: 4,
            },
            max_epochs: 12,
            patience: 3,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    config.train.optimizer.learning_rate = 3e-3;

    let methods = TrainedMethods::train(&split, &data.pois, &config, 11)?;
    let reports = methods.evaluate(&split, &data.pois, &data.pois, &config.ks)?;
    println!("unseen ratio {:.3}\n{}", split.unseen_ratio(), table_text(&reports));

    if let Some(dir) = std::env::args().nth(1) {
        let results = RunResults {
            run_id: "example".into(),
            seed: 11,
            config: serde_json::to_value(&config)?,
            split: Some(SplitSummary {
                threshold: split.threshold,
                seed: split.seed,
                unseen_ratio: split.unseen_ratio(),
                validation_targets: split.validation.len(),
                test_targets: split.test.len(),
                unseen_pois: split.unseen_poi_ids.len(),
            }),
            reports,
            sweep: None,
            prior: Some(methods.prior.to_json()),
        };
        for f in emit_report(&results, dir.as_ref())? {
            println!("wrote {}", f.display());
        }
    }
    Ok(())
}
