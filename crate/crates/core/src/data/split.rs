//! Temporal train/validation/test splitting with unseen-POI labelling.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::UserHistory;
use crate::error::{Error, Result};

/// A post-threshold visit qualifies as a prediction target only when at
/// least this many visits of the same user precede it.
pub const MIN_PRECEDING_VISITS: usize = 2;

/// Tolerance for [`find_threshold_for_unseen_ratio`].
const RATIO_TOLERANCE: f64 = 0.05;

/// A prediction target: visit `position` of `histories[user]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TargetRef {
    pub user: usize,
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub threshold: i64,
    pub seed: u64,
    /// Complete histories; targets index into these. Windows preceding a
    /// target may reach back across the threshold.
    pub histories: Vec<UserHistory>,
    /// Pre-threshold prefixes of users with at least one training visit.
    pub train: Vec<UserHistory>,
    pub validation: Vec<TargetRef>,
    pub test: Vec<TargetRef>,
    pub unseen_poi_ids: BTreeSet<String>,
}

impl DatasetSplit {
    pub fn target_poi(&self, t: TargetRef) -> &str {
        &self.histories[t.user].visits[t.position].poi_id
    }

    pub fn is_unseen_target(&self, t: TargetRef) -> bool {
        self.unseen_poi_ids.contains(self.target_poi(t))
    }

    pub fn train_poi_ids(&self) -> BTreeSet<&str> {
        self.train
            .iter()
            .flat_map(|h| h.visits.iter().map(|v| v.poi_id.as_str()))
            .collect()
    }

    /// Realized unseen ratio among distinct target POIs.
    pub fn unseen_ratio(&self) -> f64 {
        let targets: BTreeSet<&str> = self
            .validation
            .iter()
            .chain(&self.test)
            .map(|&t| self.target_poi(t))
            .collect();
        if targets.is_empty() {
            0.0
        } else {
            self.unseen_poi_ids.len() as f64 / targets.len() as f64
        }
    }
}

/// Targets for `threshold` in (user, position) order.
fn targets_at(histories: &[UserHistory], threshold: i64) -> Vec<TargetRef> {
    let mut out = Vec::new();
    for (user, h) in histories.iter().enumerate() {
        for (position, v) in h.visits.iter().enumerate() {
            if position >= MIN_PRECEDING_VISITS && v.timestamp >= threshold {
                out.push(TargetRef { user, position });
            }
        }
    }
    out
}

fn train_pois(histories: &[UserHistory], threshold: i64) -> HashSet<&str> {
    histories
        .iter()
        .flat_map(|h| h.visits.iter())
        .filter(|v| v.timestamp < threshold)
        .map(|v| v.poi_id.as_str())
        .collect()
}

/// Unseen ratio at `threshold`: distinct target POIs absent from training,
/// over distinct target POIs. `None` when there is no target.
pub fn unseen_ratio(histories: &[UserHistory], threshold: i64) -> Option<f64> {
    let seen = train_pois(histories, threshold);
    let targets: HashSet<&str> = targets_at(histories, threshold)
        .into_iter()
        .map(|t| histories[t.user].visits[t.position].poi_id.as_str())
        .collect();
    if targets.is_empty() {
        return None;
    }
    let unseen = targets.iter().filter(|p| !seen.contains(*p)).count();
    Some(unseen as f64 / targets.len() as f64)
}

/// Splits at `threshold`: training gets every earlier visit, qualifying
/// later visits become targets assigned half to validation and half to test
/// by a seeded shuffle.
pub fn temporal_split(histories: &[UserHistory], threshold: i64, seed: u64) -> Result<DatasetSplit> {
    let train: Vec<UserHistory> = histories
        .iter()
        .filter_map(|h| {
            let visits: Vec<_> = h
                .visits
                .iter()
                .filter(|v| v.timestamp < threshold)
                .cloned()
                .collect();
            (!visits.is_empty()).then(|| UserHistory {
                user_id: h.user_id.clone(),
                visits,
            })
        })
        .collect();
    if train.is_empty() {
        return Err(Error::config(format!(
            "threshold {threshold} leaves the training partition empty"
        )));
    }

    let mut targets = targets_at(histories, threshold);
    if targets.is_empty() {
        return Err(Error::config(format!(
            "threshold {threshold} leaves no test targets"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    targets.shuffle(&mut rng);
    let half = targets.len() / 2;
    let mut validation = targets[..half].to_vec();
    let mut test = targets[half..].to_vec();
    validation.sort();
    test.sort();

    let seen = train_pois(histories, threshold);
    let unseen_poi_ids = validation
        .iter()
        .chain(&test)
        .map(|t| histories[t.user].visits[t.position].poi_id.as_str())
        .filter(|p| !seen.contains(p))
        .map(str::to_string)
        .collect();

    Ok(DatasetSplit {
        threshold,
        seed,
        histories: histories.to_vec(),
        train,
        validation,
        test,
        unseen_poi_ids,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: i64,
    pub realized_ratio: f64,
}

/// Candidate thresholds: distinct timestamps that leave both a non-empty
/// training set and at least one target.
fn candidate_thresholds(histories: &[UserHistory]) -> Vec<i64> {
    let mut ts: Vec<i64> = histories
        .iter()
        .flat_map(|h| h.visits.iter().map(|v| v.timestamp))
        .collect();
    ts.sort_unstable();
    ts.dedup();
    let Some(&first) = ts.first() else {
        return ts;
    };
    let last_target = histories
        .iter()
        .filter_map(|h| h.visits.get(MIN_PRECEDING_VISITS..))
        .flat_map(|vs| vs.iter().map(|v| v.timestamp))
        .max();
    match last_target {
        Some(last) => ts.into_iter().filter(|&t| t > first && t <= last).collect(),
        None => Vec::new(),
    }
}

/// Binary-searches the candidate thresholds for the one whose realized
/// unseen ratio is closest to `target_ratio`, treating the ratio as
/// non-increasing in the threshold. Ties resolve to the earliest threshold.
pub fn find_threshold_for_unseen_ratio(
    histories: &[UserHistory],
    target_ratio: f64,
) -> Result<ThresholdChoice> {
    let cands = candidate_thresholds(histories);
    if cands.is_empty() {
        return Err(Error::config("no threshold leaves both training data and targets"));
    }
    let ratio_at = |i: usize| unseen_ratio(histories, cands[i]).unwrap_or(0.0);

    // First index whose ratio is <= v.
    let first_at_or_below = |v: f64| {
        let (mut lo, mut hi) = (0usize, cands.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if ratio_at(mid) <= v {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    };

    let max = ratio_at(0);
    let min = ratio_at(cands.len() - 1);
    let unreachable = Error::UnreachableRatio {
        target: target_ratio,
        min,
        max,
    };
    if !(target_ratio > 0.0 && target_ratio < 1.0) {
        return Err(unreachable);
    }

    let i = first_at_or_below(target_ratio);
    let mut best: Option<(usize, f64)> = None;
    for j in [i.checked_sub(1), (i < cands.len()).then_some(i)]
        .into_iter()
        .flatten()
    {
        let r = ratio_at(j);
        let better = match best {
            None => true,
            Some((_, b)) => (r - target_ratio).abs() < (b - target_ratio).abs(),
        };
        if better {
            best = Some((j, r));
        }
    }
    let (_, realized) = best.expect("at least one neighbour");
    if (realized - target_ratio).abs() > RATIO_TOLERANCE {
        return Err(unreachable);
    }
    // Earliest threshold on the same plateau.
    let j = first_at_or_below(realized);
    let realized_ratio = ratio_at(j);
    Ok(ThresholdChoice {
        threshold: cands[j],
        realized_ratio,
    })
}
