//! Encode a user's recent visits, fused with similar users' states, into a
//! context vector.

use nextpoi::data::temporal_split;
use nextpoi::encoder::{build_colocation, build_window, EncoderConfig, SequenceEncoder, Vocabularies};
use nextpoi::nn::ParamStore;
use nextpoi::synthetic::{generate, SyntheticConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let data = generate(&SyntheticConfig::swap())?;
    let histories = data.histories();
    let split = temporal_split(&histories, data.swap_time.expect("swap generator"), 3)?;
    let vocab = Vocabularies::from_training(&split.train, &data.pois);
    println!("{} training POIs, {} categories", vocab.poi_count(), vocab.category_count());

    let config = EncoderConfig::default();
    let mut params = ParamStore::new();
    let encoder = SequenceEncoder::new(config, &vocab, &mut params, &mut ChaCha8Rng::seed_from_u64(0))?;
    println!("{} parameter tensors, {} scalars", params.len(), params.scalar_count());

    let target = split.test[0];
    let history = &split.histories[target.user];
    let window = build_window(history, target.position, &vocab, &data.pois, &config)?;
    let unknown = window.poi_indices.iter().filter(|&&i| i == vocab.poi_unk()).count();
    println!(
        "user {}: window of {} real visits ({unknown} at POIs unknown to training)",
        history.user_id,
        window.real_len()
    );

    let users: Vec<String> = split.histories.iter().map(|h| h.user_id.clone()).collect();
    let colocation = build_colocation(&users, &split.train, &data.pois);
    let neighbors = colocation.select_neighbors(target.user, config.neighbor_count);
    for n in &neighbors {
        println!("  neighbour {} (cosine {:.3})", users[n.user], n.similarity);
    }
    let neighbor_states = neighbors
        .iter()
        .map(|n| {
            let h = &split.train.iter().find(|h| h.user_id == users[n.user]).expect("neighbour trained");
            let w = build_window(h, h.visits.len(), &vocab, &data.pois, &config)?;
            encoder.encode_sequence(&params, &w)
        })
        .collect::<nextpoi::Result<Vec<_>>>()?;

    let own = encoder.encode_sequence(&params, &window)?;
    let fused = encoder.fuse_social(&params, &own, &neighbor_states)?;
    println!(
        "context vector: {} values, first four {:?}",
        fused.len(),
        &fused.values[..4]
    );
    Ok(())
}
