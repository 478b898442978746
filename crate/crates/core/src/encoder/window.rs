use crate::data::{PoiSet, UserHistory};
use crate::error::{Error, Result};

use super::vocab::{Vocabularies, TIME_PAD};
use super::EncoderConfig;

/// Fixed-length, left-padded view of the visits preceding a prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitWindow {
    pub poi_indices: Vec<usize>,
    pub category_indices: Vec<usize>,
    pub temporal_indices: Vec<usize>,
    /// `true` at real positions.
    pub mask: Vec<bool>,
}

impl VisitWindow {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Window over the first `end_index` visits of `history` (the last
/// `window_length` of them). POIs outside the training vocabulary map to
/// UNK; the category channel still carries their true category.
pub fn build_window(
    history: &UserHistory,
    end_index: usize,
    vocab: &Vocabularies,
    pois: &PoiSet,
    config: &EncoderConfig,
) -> Result<VisitWindow> {
    if end_index == 0 || end_index > history.len() {
        return Err(Error::contract(format!(
            "window end {end_index} outside 1..={}",
            history.len()
        )));
    }
    let w = config.window_length;
    let start = end_index.saturating_sub(w);
    let real = &history.visits[start..end_index];
    let pad = w - real.len();

    let mut window = VisitWindow {
        poi_indices: vec![vocab.poi_pad(); pad],
        category_indices: vec![vocab.category_pad(); pad],
        temporal_indices: vec![TIME_PAD; pad],
        mask: vec![false; pad],
    };
    for v in real {
        window
            .poi_indices
            .push(vocab.poi(&v.poi_id).unwrap_or(vocab.poi_unk()));
        let cat = pois
            .get(&v.poi_id)
            .and_then(|p| vocab.category(&p.category_id))
            .unwrap_or(vocab.category_unk());
        window.category_indices.push(cat);
        window.temporal_indices.push(v.hour_of_week());
        window.mask.push(true);
    }
    Ok(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{PoiRecord, Visit};

    fn fixture() -> (UserHistory, PoiSet) {
        let pois = PoiSet::from_records(
            ["old1", "old2", "fresh"]
                .iter()
                .zip(["food", "bar", "food"])
                .map(|(id, cat)| PoiRecord {
                    poi_id: id.to_string(),
                    lat: 40.7,
                    lon: -74.0,
                    category_id: cat.into(),
                })
                .collect(),
            None,
        );
        let visits = ["old1", "old2", "fresh"]
            .iter()
            .enumerate()
            .map(|(i, p)| Visit {
                user_id: "u".into(),
                timestamp: 1_333_476_000 + 3600 * i as i64,
                poi_id: p.to_string(),
                tz_offset_minutes: 0,
            })
            .collect();
        (
            UserHistory {
                user_id: "u".into(),
                visits,
            },
            pois,
        )
    }

    fn vocab(pois: &PoiSet) -> Vocabularies {
        Vocabularies::new(
            vec!["old1".into(), "old2".into()],
            pois.category_vocabulary().to_vec(),
        )
    }

    #[test]
    fn single_visit_is_left_padded() {
        let (h, pois) = fixture();
        let v = vocab(&pois);
        let w = build_window(&h, 1, &v, &pois, &EncoderConfig::default()).unwrap();
        assert_eq!(w.len(), 20);
        assert_eq!(w.real_len(), 1);
        assert!(w.mask[..19].iter().all(|m| !m));
        assert!(w.mask[19]);
        assert!(w.poi_indices[..19].iter().all(|&i| i == v.poi_pad()));
        assert_eq!(w.poi_indices[19], 0);
    }

    #[test]
    fn unseen_poi_keeps_its_category() {
        let (h, pois) = fixture();
        let v = vocab(&pois);
        let w = build_window(&h, 3, &v, &pois, &EncoderConfig::default()).unwrap();
        assert_eq!(w.poi_indices[19], v.poi_unk());
        assert_eq!(w.category_indices[19], v.category("food").unwrap());
        assert_eq!(w.category_indices[18], v.category("bar").unwrap());
    }

    #[test]
    fn window_truncates_to_most_recent() {
        let (h, pois) = fixture();
        let v = vocab(&pois);
        let config = EncoderConfig {
            window_length: 2,
            ..EncoderConfig::default()
        };
        let w = build_window(&h, 3, &v, &pois, &config).unwrap();
        assert_eq!(w.poi_indices, vec![1, v.poi_unk()]);
        // 2012-04-03 18:00 UTC is Tuesday hour 42; the next two are 43, 44.
        assert_eq!(w.temporal_indices, vec![43, 44]);
    }

    #[test]
    fn out_of_range_end_is_rejected() {
        let (h, pois) = fixture();
        let v = vocab(&pois);
        let c = EncoderConfig::default();
        assert!(build_window(&h, 0, &v, &pois, &c).is_err());
        assert!(build_window(&h, 4, &v, &pois, &c).is_err());
    }
}
