//! Train the next-category classifier, save a checkpoint and reload it.
//!
//! ```text
//! RUST_LOG=info cargo run --release --example train_classifier
//! ```

use nextpoi::classifier::{load_checkpoint, save_checkpoint, train, validation_metric, Checkpoint, TrainConfig};
use nextpoi::data::temporal_split;
use nextpoi::encoder::EncoderConfig;
use nextpoi::synthetic::{generate, SyntheticConfig};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let data = generate(&SyntheticConfig::swap())?;
    let histories = data.histories();
    let split = temporal_split(&histories, data.swap_time.expect("swap generator"), 5)?;

    let mut config = TrainConfig {
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
        max_epochs: 10,
        patience: 3,
        ..TrainConfig::default()
    };
    config.optimizer.learning_rate = 3e-3;

    let state = train(&split, &data.pois, &config, 5)?;
    println!(
        "best validation category acc@1 {:.4} (epoch {:?}); generator optimum {:.4}",
        state.best_validation,
        state.best_epoch,
        data.bayes_category_rate()
    );

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("joint.ckpt");
    save_checkpoint(&Checkpoint::from_state(&state), &path)?;
    let reloaded = load_checkpoint(&path)?.into_state(&split, &data.pois, config)?;
    let test = validation_metric(&reloaded.predictor, &split, &data.pois, &split.test)?;
    println!(
        "checkpoint {} bytes; reloaded model test category acc@1 {test:.4}",
        std::fs::metadata(&path)?.len()
    );
    Ok(())
}
