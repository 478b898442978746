use rayon::prelude::*;

use super::{CategoryDistribution, ForecastModel};
use crate::data::{DatasetSplit, PoiSet, TargetRef};
use crate::encoder::{build_colocation, build_window, ContextVector, VisitWindow};
use crate::error::Result;

/// Neighbour lists from training co-location and the neighbours' encoded
/// latest training windows. Indexed like `DatasetSplit::histories`.
#[derive(Debug, Clone)]
pub struct SocialContext {
    neighbors: Vec<Vec<usize>>,
    train_len: Vec<usize>,
    vectors: Vec<Option<ContextVector>>,
}

impl SocialContext {
    /// Neighbours are the `neighbor_count` most similar users with strictly
    /// positive cosine similarity.
    pub fn new(split: &DatasetSplit, pois: &PoiSet, neighbor_count: usize) -> Self {
        let users: Vec<String> = split.histories.iter().map(|h| h.user_id.clone()).collect();
        let matrix = build_colocation(&users, &split.train, pois);
        let neighbors = (0..users.len())
            .into_par_iter()
            .map(|u| {
                matrix
                    .select_neighbors(u, neighbor_count)
                    .into_iter()
                    .filter(|n| n.similarity > 0.0)
                    .map(|n| n.user)
                    .collect()
            })
            .collect();
        let train_len = split
            .histories
            .iter()
            .map(|h| h.visits.iter().take_while(|v| v.timestamp < split.threshold).count())
            .collect();
        SocialContext {
            neighbors,
            train_len,
            vectors: vec![None; users.len()],
        }
    }

    pub fn neighbors(&self, user: usize) -> &[usize] {
        &self.neighbors[user]
    }

    /// Number of leading training visits of `user`.
    pub fn train_len(&self, user: usize) -> usize {
        self.train_len[user]
    }

    /// Re-encodes every user's latest training window with `model`.
    pub fn refresh(&mut self, model: &ForecastModel, split: &DatasetSplit, pois: &PoiSet) -> Result<()> {
        let config = *model.config();
        self.vectors = split
            .histories
            .par_iter()
            .zip(&self.train_len)
            .map(|(h, &n)| {
                if n == 0 {
                    return Ok(None);
                }
                let w = build_window(h, n, &model.vocab, pois, &config)?;
                model.encoder().encode_sequence(&model.params, &w).map(Some)
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn neighbor_vectors(&self, user: usize) -> Vec<ContextVector> {
        self.neighbors[user]
            .iter()
            .filter_map(|&n| self.vectors[n].clone())
            .collect()
    }
}

/// A trained model together with the social context it was trained with.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub model: ForecastModel,
    pub social: SocialContext,
}

impl Predictor {
    /// Builds the social context for `split` and encodes neighbour windows
    /// with the model's current parameters.
    pub fn new(model: ForecastModel, split: &DatasetSplit, pois: &PoiSet) -> Result<Self> {
        let mut social = SocialContext::new(split, pois, model.config().neighbor_count);
        social.refresh(&model, split, pois)?;
        Ok(Predictor { model, social })
    }

    pub fn window_for(&self, split: &DatasetSplit, pois: &PoiSet, target: TargetRef) -> Result<VisitWindow> {
        build_window(
            &split.histories[target.user],
            target.position,
            &self.model.vocab,
            pois,
            self.model.config(),
        )
    }

    /// Context vector for predicting visit `target` from the visits before it.
    pub fn context(&self, split: &DatasetSplit, pois: &PoiSet, target: TargetRef) -> Result<ContextVector> {
        let w = self.window_for(split, pois, target)?;
        self.model.context(&w, &self.social.neighbor_vectors(target.user))
    }

    /// Distribution over the head's classes for `target`.
    pub fn predict(&self, split: &DatasetSplit, pois: &PoiSet, target: TargetRef) -> Result<CategoryDistribution> {
        let f = self.context(split, pois, target)?;
        self.model.predict(&f)
    }
}
