use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::nn::{ParamStore, Tape};

fn vocab(pois: usize, cats: usize) -> Vocabularies {
    Vocabularies::new(
        (0..pois).map(|i| format!("p{i:03}")).collect(),
        (0..cats).map(|i| format!("c{i}")).collect(),
    )
}

fn setup(config: EncoderConfig, seed: u64) -> (SequenceEncoder, ParamStore, Vocabularies) {
    let v = vocab(12, 5);
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = SequenceEncoder::new(config, &v, &mut store, &mut rng).unwrap();
    (enc, store, v)
}

fn window(v: &Vocabularies, config: &EncoderConfig, real: &[(usize, usize, usize)]) -> VisitWindow {
    let pad = config.window_length - real.len();
    let mut w = VisitWindow {
        poi_indices: vec![v.poi_pad(); pad],
        category_indices: vec![v.category_pad(); pad],
        temporal_indices: vec![HOURS_PER_WEEK; pad],
        mask: vec![false; pad],
    };
    for &(p, c, t) in real {
        w.poi_indices.push(p);
        w.category_indices.push(c);
        w.temporal_indices.push(t);
        w.mask.push(true);
    }
    w
}

fn small() -> EncoderConfig {
    EncoderConfig {
        window_length: 6,
        hidden_dim: 16,
        poi_embed_dim: 8,
        category_embed_dim: 4,
        temporal_embed_dim: 4,
        num_attention_heads: 2,
        num_layers: 2,
        neighbor_count: 3,
    }
}

#[test]
fn default_output_is_128_wide_and_deterministic() {
    let config = EncoderConfig::default();
    let (enc, store, v) = setup(config, 3);
    let w = window(&v, &config, &[(1, 2, 10), (4, 0, 30), (v.poi_unk(), 3, 100)]);
    let a = enc.encode_sequence(&store, &w).unwrap();
    let b = enc.encode_sequence(&store, &w).unwrap();
    assert_eq!(a.len(), 128);
    assert_eq!(a, b);
    let f = enc.fuse_social(&store, &a, std::slice::from_ref(&b)).unwrap();
    assert_eq!(f.len(), 128);
}

#[test]
fn swapping_positions_changes_output() {
    let config = small();
    let (enc, store, v) = setup(config, 5);
    let a = window(&v, &config, &[(1, 2, 10), (4, 0, 30), (6, 1, 40)]);
    let b = window(&v, &config, &[(4, 0, 30), (1, 2, 10), (6, 1, 40)]);
    let ea = enc.encode_sequence(&store, &a).unwrap();
    let eb = enc.encode_sequence(&store, &b).unwrap();
    let diff: f64 = ea.values.iter().zip(&eb.values).map(|(x, y)| (x - y).abs()).sum();
    assert!(diff > 1e-6, "diff {diff}");
}

#[test]
fn pad_content_never_leaks() {
    let config = small();
    let (enc, store, v) = setup(config, 6);
    let base = window(&v, &config, &[(1, 2, 10), (4, 0, 30)]);
    let reference = enc.encode_sequence(&store, &base).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        let mut w = base.clone();
        for i in 0..config.window_length - 2 {
            w.poi_indices[i] = rng.random_range(0..v.poi_pad() + 1);
            w.category_indices[i] = rng.random_range(0..v.category_pad() + 1);
            w.temporal_indices[i] = rng.random_range(0..HOURS_PER_WEEK + 1);
        }
        assert_eq!(enc.encode_sequence(&store, &w).unwrap(), reference);
    }
}

#[test]
fn all_pad_window_is_rejected() {
    let config = small();
    let (enc, store, v) = setup(config, 1);
    let w = window(&v, &config, &[]);
    assert!(matches!(enc.encode_sequence(&store, &w), Err(crate::Error::Contract(_))));
}

#[test]
fn fusion_without_neighbours_depends_only_on_own() {
    let config = small();
    let (enc, store, _) = setup(config, 8);
    let own = ContextVector::new((0..16).map(|i| (i as f64 * 0.37).sin()).collect());
    let a = enc.fuse_social(&store, &own, &[]).unwrap();
    let b = enc.fuse_social(&store, &own, &[]).unwrap();
    assert_eq!(a, b);
    let other = ContextVector::new((0..16).map(|i| (i as f64 * 0.11).cos()).collect());
    assert_ne!(enc.fuse_social(&store, &other, &[]).unwrap(), a);
}

#[test]
fn duplicated_identical_keys_do_not_change_fusion() {
    // Own vector equal to the neighbour: every key is identical, so the
    // attention weights are uniform and the mixture is the same vector.
    let config = small();
    let (enc, store, _) = setup(config, 9);
    let v = ContextVector::new((0..16).map(|i| (i as f64 * 0.73).sin()).collect());
    let once = enc.fuse_social(&store, &v, std::slice::from_ref(&v)).unwrap();
    let twice = enc.fuse_social(&store, &v, &[v.clone(), v.clone()]).unwrap();
    for (a, b) in once.values.iter().zip(&twice.values) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn fusion_rejects_wrong_width() {
    let config = small();
    let (enc, store, _) = setup(config, 2);
    let own = ContextVector::new(vec![0.0; 16]);
    let bad = ContextVector::new(vec![0.0; 15]);
    assert!(enc.fuse_social(&store, &own, &[bad]).is_err());
    assert!(enc.fuse_social(&store, &bad_own(), &[]).is_err());
}

fn bad_own() -> ContextVector {
    ContextVector::new(vec![0.0; 7])
}

#[test]
fn shape_contract_for_various_configs() {
    for (h, heads, layers, wlen) in [(8, 1, 1, 3), (12, 3, 2, 5), (24, 4, 3, 4)] {
        let config = EncoderConfig {
            window_length: wlen,
            hidden_dim: h,
            poi_embed_dim: h / 2,
            category_embed_dim: h / 4,
            temporal_embed_dim: h - h / 2 - h / 4,
            num_attention_heads: heads,
            num_layers: layers,
            neighbor_count: 2,
        };
        let (enc, store, v) = setup(config, 4);
        let w = window(&v, &config, &[(0, 1, 2)]);
        let e = enc.encode_sequence(&store, &w).unwrap();
        assert_eq!(e.len(), h);
        let f = enc.fuse_social(&store, &e, std::slice::from_ref(&e)).unwrap();
        assert_eq!(f.len(), h);
    }
}

/// Central-difference check of every encoder parameter for a weighted-sum
/// loss over the fused representation.
#[test]
fn tiny_encoder_gradients_match_finite_differences() {
    let config = EncoderConfig {
        window_length: 3,
        hidden_dim: 8,
        poi_embed_dim: 4,
        category_embed_dim: 2,
        temporal_embed_dim: 2,
        num_attention_heads: 1,
        num_layers: 1,
        neighbor_count: 2,
    };
    let (enc, mut store, v) = setup(config, 21);
    let w = window(&v, &config, &[(3, 1, 5), (v.poi_unk(), 4, 77)]);
    let neighbors = vec![
        ContextVector::new((0..8).map(|i| (i as f64).sin()).collect()),
        ContextVector::new((0..8).map(|i| (i as f64 * 0.5).cos()).collect()),
    ];
    let weights: Vec<f64> = (0..8).map(|i| 0.3 + 0.1 * i as f64).collect();
    let loss = |store: &ParamStore| -> (f64, crate::nn::Gradients) {
        let mut tape = Tape::new(store);
        let h = enc.encode(&mut tape, &w).unwrap();
        let f = enc.fuse(&mut tape, h, &neighbors).unwrap();
        let seed = ndarray::Array2::from_shape_vec((1, 8), weights.clone()).unwrap();
        let value: f64 = tape.value(f).iter().zip(&weights).map(|(a, b)| a * b).sum();
        (value, tape.backward_from(f, seed).params)
    };
    let (_, analytic) = loss(&store);
    let step = 1e-6;
    for id in store.ids().collect::<Vec<_>>() {
        let a = analytic.to_dense(id, store.get(id));
        let mut num = a.clone();
        for idx in ndarray::indices(store.get(id).raw_dim()) {
            let orig = store.get(id)[idx];
            store.get_mut(id)[idx] = orig + step;
            let up = loss(&store).0;
            store.get_mut(id)[idx] = orig - step;
            let down = loss(&store).0;
            store.get_mut(id)[idx] = orig;
            num[idx] = (up - down) / (2.0 * step);
        }
        let diff = (&a - &num).mapv(|x| x * x).sum().sqrt();
        let scale = a.mapv(|x| x * x).sum().sqrt() + num.mapv(|x| x * x).sum().sqrt();
        // Key biases have an exactly-zero gradient; compare those absolutely.
        if diff <= 1e-8 {
            continue;
        }
        assert!(diff / scale <= 1e-4, "{}: relative error {}", store.name(id), diff / scale);
    }
}
