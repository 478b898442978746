//! Rank every candidate POI for one target with the joint scorer and with
//! the direct POI classifier, and compare where the true POI lands.

use nextpoi::classifier::{train_with_objective, Objective, TrainConfig};
use nextpoi::data::temporal_split;
use nextpoi::encoder::EncoderConfig;
use nextpoi::geo::{estimate_prior, DistanceBucketing};
use nextpoi::ranker::{rank_baseline, rank_joint, top_k};
use nextpoi::synthetic::{generate, SyntheticConfig};

fn main() -> anyhow::Result<()> {
    let data = generate(&SyntheticConfig::swap())?;
    let histories = data.histories();
    let swap = data.swap_time.expect("swap generator");
    let split = temporal_split(&histories, swap, 9)?;
    let candidates = data.active_at(swap);

    let config = TrainConfig {
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
        max_epochs: 6,
        ..TrainConfig::default()
    };
    let joint = train_with_objective(&split, &data.pois, &config, Objective::Category, 1)?.predictor;
    let baseline = train_with_objective(&split, &data.pois, &config, Objective::Poi, 2)?.predictor;
    let prior = estimate_prior(&split.train, &data.pois, DistanceBucketing::default(), 1.0)?;

    let target = *split
        .test
        .iter()
        .find(|&&t| split.is_unseen_target(t))
        .expect("swap makes some targets unseen");
    let history = &split.histories[target.user];
    let truth = split.target_poi(target);
    let anchor = data.pois.get(&history.visits[target.position - 1].poi_id).expect("known POI");

    let categories = joint.predict(&split, &data.pois, target)?;
    let r = rank_joint(&history.user_id, &categories, &joint.model.vocab, &prior, anchor, &candidates)?;
    println!("user {}, true next POI {truth} (never seen in training)", history.user_id);
    println!("joint top-5: {:?}", top_k(&r, 5));
    println!("joint rank of truth: {:?}, score {:.4}", r.rank_of(truth), r.score_of(truth).unwrap_or(0.0));

    let pois = baseline.predict(&split, &data.pois, target)?;
    let b = rank_baseline(&history.user_id, &anchor.poi_id, &pois, &baseline.model.vocab, &candidates)?;
    println!("baseline top-5: {:?}", top_k(&b, 5));
    println!(
        "baseline rank of truth: {:?}, score {}",
        b.rank_of(truth),
        b.score_of(truth).unwrap_or(0.0)
    );
    Ok(())
}
