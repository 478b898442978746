use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_ks, EvalReport, BASELINE, JOINT};
use crate::data::{find_threshold_for_unseen_ratio, temporal_split, DatasetSplit, UserHistory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub target_ratio: f64,
    pub threshold: i64,
    pub realized_ratio: f64,
    pub reports: Vec<EvalReport>,
}

/// Joint versus baseline slope at one `k`. `ratio` is baseline slope over
/// joint slope, when the joint slope is nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeComparison {
    pub k: usize,
    pub joint: f64,
    pub baseline: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub ks: Vec<usize>,
    pub points: Vec<SweepPoint>,
    /// method → k → least-squares slope of Acc@k against the realized ratio.
    pub slopes: BTreeMap<String, BTreeMap<usize, f64>>,
    pub comparison: Vec<SlopeComparison>,
}

/// Ordinary least-squares slope; `None` with fewer than two distinct xs.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

impl SweepResult {
    /// Assembles points (sorted by realized ratio) and fits every slope.
    pub fn from_points(ks: &[usize], mut points: Vec<SweepPoint>) -> Result<Self> {
        let ks = check_ks(ks)?;
        points.sort_by(|a, b| a.realized_ratio.total_cmp(&b.realized_ratio));
        if points.windows(2).any(|w| w[0].realized_ratio >= w[1].realized_ratio) {
            return Err(Error::contract("sweep ratios must be strictly increasing"));
        }
        let mut series: BTreeMap<String, BTreeMap<usize, Vec<(f64, f64)>>> = BTreeMap::new();
        for p in &points {
            for r in &p.reports {
                for (&k, &acc) in &r.acc_at {
                    series
                        .entry(r.method.clone())
                        .or_default()
                        .entry(k)
                        .or_default()
                        .push((p.realized_ratio, acc));
                }
            }
        }
        let slopes: BTreeMap<String, BTreeMap<usize, f64>> = series
            .into_iter()
            .map(|(m, by_k)| {
                let fitted = by_k
                    .into_iter()
                    .filter_map(|(k, xy)| least_squares_slope(&xy).map(|s| (k, s)))
                    .collect();
                (m, fitted)
            })
            .collect();
        let comparison = match (slopes.get(JOINT), slopes.get(BASELINE)) {
            (Some(j), Some(b)) => ks
                .iter()
                .filter_map(|k| {
                    let (&joint, &baseline) = (j.get(k)?, b.get(k)?);
                    Some(SlopeComparison {
                        k: *k,
                        joint,
                        baseline,
                        ratio: (joint != 0.0).then(|| baseline / joint),
                    })
                })
                .collect(),
            _ => Vec::new(),
        };
        Ok(SweepResult {
            ks,
            points,
            slopes,
            comparison,
        })
    }

    pub fn slope(&self, method: &str, k: usize) -> Option<f64> {
        self.slopes.get(method)?.get(&k).copied()
    }

    /// Mean slope over all fitted k for `method`.
    pub fn mean_slope(&self, method: &str) -> Option<f64> {
        let s = self.slopes.get(method)?;
        (!s.is_empty()).then(|| s.values().sum::<f64>() / s.len() as f64)
    }
}

/// For each ratio: pick a threshold, split, and let `run` train and
/// evaluate on it. Unreachable ratios and ratios that land on an already
/// used threshold are skipped with a warning.
pub fn sweep_unseen_ratio<F>(
    histories: &[UserHistory],
    ratios: &[f64],
    ks: &[usize],
    seed: u64,
    mut run: F,
) -> Result<SweepResult>
where
    F: FnMut(&DatasetSplit) -> Result<Vec<EvalReport>>,
{
    let mut points: Vec<SweepPoint> = Vec::new();
    for &ratio in ratios {
        let choice = match find_threshold_for_unseen_ratio(histories, ratio) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("skipping unseen ratio {ratio}: {e}");
                continue;
            }
        };
        if points.iter().any(|p| p.threshold == choice.threshold) {
            log::warn!("skipping unseen ratio {ratio}: threshold {} already used", choice.threshold);
            continue;
        }
        let split = temporal_split(histories, choice.threshold, seed)?;
        log::info!(
            "sweep point {ratio}: threshold {}, realized {:.4}, {} test targets",
            choice.threshold,
            split.unseen_ratio(),
            split.test.len()
        );
        let reports = run(&split)?;
        points.push(SweepPoint {
            target_ratio: ratio,
            threshold: choice.threshold,
            realized_ratio: split.unseen_ratio(),
            reports,
        });
    }
    if points.is_empty() {
        return Err(Error::config("no sweep ratio was reachable"));
    }
    SweepResult::from_points(ks, points)
}
