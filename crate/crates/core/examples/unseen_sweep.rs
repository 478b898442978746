//! Retrain both methods at increasing unseen-POI ratios and fit how fast
//! each one's accuracy falls.
//!
//! ```text
//! cargo run --release --example unseen_sweep -- [output-dir]
//! ```

use nextpoi::classifier::TrainConfig;
use nextpoi::encoder::EncoderConfig;
use nextpoi::eval::{emit_report, sweep_unseen_ratio, RunResults};
use nextpoi::pipeline::{ExperimentConfig, TrainedMethods};
use nextpoi::synthetic::{generate, SyntheticConfig};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let data = generate(&SyntheticConfig::churn())?;
    let histories = data.histories();
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

    let sweep = sweep_unseen_ratio(&histories, &[0.2, 0.4, 0.6, 0.8], &config.ks, 1, |split| {
        TrainedMethods::train(split, &data.pois, &config, 1)?.evaluate(split, &data.pois, &data.pois, &config.ks)
    })?;
    for p in &sweep.points {
        for r in &p.reports {
            println!("ratio {:.3}  {:<9} Acc@20 {:.4}", p.realized_ratio, r.method, r.acc_at[&20]);
        }
    }
    for c in &sweep.comparison {
        println!("Acc@{:<3} slope  joint {:+.4}  baseline {:+.4}", c.k, c.joint, c.baseline);
    }

    if let Some(dir) = std::env::args().nth(1) {
        let results = RunResults {
            run_id: "example".into(),
            seed: 1,
            config: serde_json::to_value(&config)?,
            split: None,
            reports: Vec::new(),
            sweep: Some(sweep),
            prior: None,
        };
        emit_report(&results, dir.as_ref())?;
        println!("sweep.csv and sweep.svg written to {dir}");
    }
    Ok(())
}
