use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{group_histories, temporal_split, DatasetSplit, PoiRecord, PoiSet, TargetRef, Visit};
use crate::encoder::{EncoderConfig, Vocabularies};
use crate::nn::{AdamConfig, Tape};

fn tiny() -> EncoderConfig {
    EncoderConfig {
        window_length: 4,
        hidden_dim: 16,
        poi_embed_dim: 8,
        category_embed_dim: 4,
        temporal_embed_dim: 4,
        num_attention_heads: 2,
        num_layers: 1,
        neighbor_count: 2,
    }
}

fn pois(categories: usize) -> PoiSet {
    PoiSet::from_records(
        (0..categories)
            .map(|c| PoiRecord {
                poi_id: format!("v{c}"),
                lat: 40.70 + 0.01 * c as f64,
                lon: -74.0,
                category_id: format!("c{c}"),
            })
            .collect(),
        None,
    )
}

/// Users walk a category chain that goes to the successor with
/// probability `p_next` and otherwise to a uniformly drawn other category.
fn markov_split(users: usize, visits: usize, categories: usize, p_next: f64, seed: u64) -> DatasetSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = Vec::new();
    for u in 0..users {
        let mut c = rng.random_range(0..categories);
        for i in 0..visits {
            all.push(Visit {
                user_id: format!("u{u:02}"),
                timestamp: 1_000 + 3_600 * i as i64,
                poi_id: format!("v{c}"),
                tz_offset_minutes: 0,
            });
            c = if rng.random::<f64>() < p_next {
                (c + 1) % categories
            } else {
                let other = rng.random_range(1..categories - 1);
                (c + 1 + other) % categories
            };
        }
    }
    let histories = group_histories(all);
    let threshold = 1_000 + 3_600 * (visits as i64 * 3 / 4);
    temporal_split(&histories, threshold, seed).unwrap()
}

#[test]
fn zero_head_gives_uniform_distribution() {
    let vocab = Vocabularies::new(vec!["a".into()], (0..4).map(|c| format!("c{c}")).collect());
    let mut model = ForecastModel::new(tiny(), Objective::Category, vocab, 1).unwrap();
    for id in model.head_params() {
        model.params.get_mut(id).fill(0.0);
    }
    let f = crate::encoder::ContextVector::new(vec![0.3; 16]);
    let p = model.predict(&f).unwrap();
    for &q in &p.probabilities {
        assert!((q - 0.25).abs() < 1e-12);
    }
    assert!((category_loss(&p, 2) - 4f64.ln()).abs() < 1e-12);
    assert!((category_loss(&p, 2) - 1.3863).abs() < 1e-4);
}

#[test]
fn softmax_is_shift_invariant() {
    let a = CategoryDistribution::from_logits(&[0.5, -1.0, 2.0]).unwrap();
    let b = CategoryDistribution::from_logits(&[100.5, 99.0, 102.0]).unwrap();
    for (x, y) in a.probabilities.iter().zip(&b.probabilities) {
        assert!((x - y).abs() < 1e-12);
    }
    let sum: f64 = a.probabilities.iter().sum();
    assert!((sum - 1.0).abs() < 1e-12);
}

#[test]
fn non_finite_logits_are_rejected() {
    assert!(matches!(
        CategoryDistribution::from_logits(&[0.0, f64::NAN]),
        Err(crate::Error::Numeric(_))
    ));
}

#[test]
fn loss_values() {
    let p = CategoryDistribution {
        probabilities: vec![0.2, 0.5, 0.3],
    };
    assert!((category_loss(&p, 0) - 1.6094).abs() < 1e-4);
    let one_hot = CategoryDistribution {
        probabilities: vec![0.0, 1.0, 0.0],
    };
    assert_eq!(category_loss(&one_hot, 1), 0.0);
    assert!((category_loss(&one_hot, 0) - 1e-12f64.ln().abs()).abs() < 1e-9);
}

#[test]
fn argmax_prefers_lowest_index_on_ties() {
    let p = CategoryDistribution {
        probabilities: vec![0.1, 0.45, 0.45],
    };
    assert_eq!(p.argmax(), 1);
}

#[test]
fn head_gradient_is_softmax_minus_one_hot() {
    let vocab = Vocabularies::new(vec!["a".into()], (0..3).map(|c| format!("c{c}")).collect());
    let model = ForecastModel::new(tiny(), Objective::Category, vocab, 4).unwrap();
    let f = ndarray::Array2::from_shape_fn((1, 16), |(_, j)| (j as f64 * 0.37).sin());
    let mut tape = Tape::new(&model.params);
    let x = tape.input(f.clone());
    let z = model.head_logits(&mut tape, x);
    let loss = tape.cross_entropy(z, &[1]);
    let logits: Vec<f64> = tape.value(z).iter().copied().collect();
    let back = tape.backward(loss);
    let out_b = model.head_params()[3];
    let g = back.params.to_dense(out_b, model.params.get(out_b));
    let p = crate::nn::softmax(&logits);
    for k in 0..3 {
        let expected = p[k] - if k == 1 { 1.0 } else { 0.0 };
        assert!((g[[0, k]] - expected).abs() < 1e-12, "class {k}");
    }
}

fn fast(max_epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        encoder: tiny(),
        optimizer: AdamConfig {
            learning_rate: lr,
            ..AdamConfig::default()
        },
        batch_size: 16,
        max_epochs,
        patience: max_epochs,
        unk_dropout: 0.0,
    }
}

fn single_example_split() -> (DatasetSplit, PoiSet) {
    let visit = |t: i64, p: &str| Visit {
        user_id: "u".into(),
        timestamp: t,
        poi_id: p.into(),
        tz_offset_minutes: 0,
    };
    let histories = group_histories(vec![visit(1, "v0"), visit(2, "v2"), visit(10, "v1")]);
    (temporal_split(&histories, 5, 0).unwrap(), pois(4))
}

#[test]
fn memorizes_a_single_example() {
    let (split, set) = single_example_split();
    let state = train(&split, &set, &fast(150, 1e-2), 7).unwrap();
    let first = state.history[0].train_loss;
    assert!(state.history[10].train_loss < first);
    let last = state.history.last().unwrap().train_loss;
    assert!(last < 0.01, "final loss {last}");
}

#[test]
fn first_epoch_loss_is_deterministic() {
    let split = markov_split(6, 20, 4, 0.9, 3);
    let set = pois(4);
    let a = train(&split, &set, &fast(1, 1e-3), 11).unwrap();
    let b = train(&split, &set, &fast(1, 1e-3), 11).unwrap();
    assert_eq!(a.history[0].train_loss, b.history[0].train_loss);
    assert_eq!(a.predictor.model.params, b.predictor.model.params);
}

#[test]
fn learns_markov_chain_near_bayes_rate() {
    let split = markov_split(30, 60, 4, 0.9, 5);
    let set = pois(4);
    let mut config = fast(30, 5e-3);
    config.patience = 8;
    let state = train(&split, &set, &config, 2).unwrap();
    let acc = validation_metric(&state.predictor, &split, &set, &split.test).unwrap();
    assert!(acc >= 0.85, "test accuracy {acc}");
}

#[test]
fn empty_training_examples_are_rejected() {
    let visit = |t: i64, u: &str| Visit {
        user_id: u.into(),
        timestamp: t,
        poi_id: "v0".into(),
        tz_offset_minutes: 0,
    };
    let histories = group_histories(vec![visit(1, "a"), visit(6, "a"), visit(7, "a"), visit(8, "a")]);
    let split = temporal_split(&histories, 5, 0).unwrap();
    assert!(train(&split, &pois(2), &fast(1, 1e-3), 0).is_err());
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let split = markov_split(6, 20, 4, 0.9, 8);
    let set = pois(4);
    let state = train(&split, &set, &fast(2, 1e-3), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&Checkpoint::from_state(&state), &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert!(loaded.is_resumable());
    assert_eq!(loaded.history(), state.history.as_slice());
    assert_eq!(loaded.model.params, state.predictor.model.params);
    let restored = loaded.into_state(&split, &set, state.config).unwrap();
    assert_eq!(restored.optimizer, state.optimizer);
    for &t in split.test.iter().take(5) {
        let a = state.predictor.predict(&split, &set, t).unwrap();
        let b = restored.predictor.predict(&split, &set, t).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let vocab = Vocabularies::new(vec!["a".into()], vec!["c".into()]);
    let model = ForecastModel::new(tiny(), Objective::Category, vocab, 0).unwrap();
    let mut bytes = Vec::new();
    write_checkpoint(&Checkpoint::from_model(model), &mut bytes).unwrap();
    assert!(read_checkpoint(&bytes[..]).is_ok());
    assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(read_checkpoint(&wrong[..]).is_err());
    let mut longer = bytes;
    longer.push(0);
    assert!(read_checkpoint(&longer[..]).is_err());
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let split = markov_split(6, 20, 4, 0.9, 9);
    let set = pois(4);
    let full = train(&split, &set, &fast(4, 1e-3), 5).unwrap();

    let trainer = Trainer::new(&split, &set, fast(4, 1e-3), Objective::Category).unwrap();
    let mut state = trainer.initial_state(5).unwrap();
    trainer.run_epoch(&mut state).unwrap();
    trainer.run_epoch(&mut state).unwrap();
    let mut bytes = Vec::new();
    write_checkpoint(&Checkpoint::from_state(&state), &mut bytes).unwrap();
    let mut resumed = read_checkpoint(&bytes[..]).unwrap().into_state(&split, &set, fast(4, 1e-3)).unwrap();
    trainer.run_epoch(&mut resumed).unwrap();
    trainer.run_epoch(&mut state).unwrap();
    assert_eq!(resumed.predictor.model.params, state.predictor.model.params);
    assert_eq!(full.history.len(), 4);
}

#[test]
fn poi_objective_uses_training_vocabulary() {
    let split = markov_split(6, 20, 4, 0.9, 10);
    let set = pois(4);
    let state = train_with_objective(&split, &set, &fast(1, 1e-3), Objective::Poi, 0).unwrap();
    assert_eq!(state.predictor.model.output_size(), state.predictor.model.vocab.poi_count());
    let t: TargetRef = split.test[0];
    assert_eq!(state.predictor.predict(&split, &set, t).unwrap().len(), 4);
}
