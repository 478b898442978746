//! Joint category × proximity scoring over candidate POIs, and the direct
//! POI-classifier baseline.

use std::cmp::Ordering;

use serde::Serialize;

use crate::classifier::CategoryDistribution;
use crate::data::{Poi, PoiSet};
use crate::encoder::Vocabularies;
use crate::error::{Error, Result};
use crate::geo::ProximityPrior;

/// Scores for every candidate of one target plus their ranking.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastRanking {
    pub user_id: String,
    pub anchor_poi: String,
    /// Candidate ids, aligned with `scores`.
    pub candidates: Vec<String>,
    pub scores: Vec<f64>,
    /// False only when every raw score was zero and nothing could be scaled.
    pub normalized: bool,
    /// Indices into `candidates`, best first, ties by ascending POI id.
    pub order: Vec<usize>,
}

impl ForecastRanking {
    /// Normalizes `scores` and sorts. Scores must be finite and non-negative.
    pub fn from_scores(user_id: &str, anchor_poi: &str, candidates: Vec<String>, mut scores: Vec<f64>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::contract("empty candidate set"));
        }
        if let Some(bad) = scores.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Numeric(format!("invalid candidate score {bad}")));
        }
        let total: f64 = scores.iter().sum();
        let normalized = total > 0.0;
        if normalized {
            scores.iter_mut().for_each(|s| *s /= total);
        }
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| candidates[a].cmp(&candidates[b]))
        });
        Ok(ForecastRanking {
            user_id: user_id.to_string(),
            anchor_poi: anchor_poi.to_string(),
            candidates,
            scores,
            normalized,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn ranked_ids(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(|&i| self.candidates[i].as_str())
    }

    pub fn score_of(&self, poi_id: &str) -> Option<f64> {
        self.candidates.iter().position(|c| c == poi_id).map(|i| self.scores[i])
    }

    /// 1-based position of `poi_id`, if it is a candidate.
    pub fn rank_of(&self, poi_id: &str) -> Option<usize> {
        self.order
            .iter()
            .position(|&i| self.candidates[i] == poi_id)
            .map(|r| r + 1)
    }
}

/// First `min(k, len)` ranked ids.
pub fn top_k(ranking: &ForecastRanking, k: usize) -> Vec<&str> {
    ranking.ranked_ids().take(k).collect()
}

/// `P(category of k) × prior(distance bucket from anchor to k)` for every
/// candidate, normalized over the candidates.
pub fn rank_joint(
    user_id: &str,
    categories: &CategoryDistribution,
    vocab: &Vocabularies,
    prior: &ProximityPrior,
    anchor: &Poi,
    candidates: &PoiSet,
) -> Result<ForecastRanking> {
    if categories.len() != vocab.category_count() {
        return Err(Error::contract(format!(
            "distribution over {} categories, vocabulary has {}",
            categories.len(),
            vocab.category_count()
        )));
    }
    let mut ids = Vec::with_capacity(candidates.len());
    let mut scores = Vec::with_capacity(candidates.len());
    for poi in candidates.iter() {
        let p_cat = vocab.category(&poi.category_id).map_or(0.0, |c| categories.get(c));
        ids.push(poi.poi_id.clone());
        scores.push(p_cat * prior.prior_probability(anchor, poi));
    }
    ForecastRanking::from_scores(user_id, &anchor.poi_id, ids, scores)
}

/// Baseline: the softmax over training-vocabulary POIs, restricted to the
/// candidates. POIs without an output unit score exactly 0.
pub fn rank_baseline(
    user_id: &str,
    anchor_poi: &str,
    poi_probabilities: &CategoryDistribution,
    vocab: &Vocabularies,
    candidates: &PoiSet,
) -> Result<ForecastRanking> {
    if poi_probabilities.len() != vocab.poi_count() {
        return Err(Error::contract(format!(
            "distribution over {} POIs, vocabulary has {}",
            poi_probabilities.len(),
            vocab.poi_count()
        )));
    }
    let ids: Vec<String> = candidates.iter().map(|p| p.poi_id.clone()).collect();
    let scores = ids
        .iter()
        .map(|id| vocab.poi(id).map_or(0.0, |i| poi_probabilities.get(i)))
        .collect();
    ForecastRanking::from_scores(user_id, anchor_poi, ids, scores)
}
