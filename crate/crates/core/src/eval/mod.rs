//! Top-k accuracy over test targets, unseen-ratio sweeps and report files.

mod plot;
mod report;
mod sweep;

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Predictor;
use crate::data::{DatasetSplit, PoiSet, TargetRef};
use crate::error::{Error, Result};
use crate::geo::ProximityPrior;
use crate::ranker::{rank_baseline, rank_joint, top_k, ForecastRanking};

pub use plot::{histogram_svg, sweep_svg};
pub use report::{emit_report, table_text, write_plots, RunResults, SplitSummary};
pub use sweep::{least_squares_slope, sweep_unseen_ratio, SlopeComparison, SweepPoint, SweepResult};

pub const DEFAULT_KS: [usize; 4] = [1, 5, 10, 20];
pub const JOINT: &str = "joint";
pub const BASELINE: &str = "baseline";

/// Anything that ranks candidates for a target visit.
pub trait RankingMethod: Sync {
    fn name(&self) -> &str;
    fn rank(&self, split: &DatasetSplit, candidates: &PoiSet, target: TargetRef) -> Result<ForecastRanking>;
}

fn anchor<'a>(split: &DatasetSplit, pois: &'a PoiSet, target: TargetRef) -> Result<&'a crate::data::Poi> {
    let id = &split.histories[target.user].visits[target.position - 1].poi_id;
    pois.get(id)
        .ok_or_else(|| Error::contract(format!("anchor POI {id} missing from the POI set")))
}

/// Category head combined with the proximity prior.
pub struct JointMethod<'a> {
    pub predictor: &'a Predictor,
    pub prior: &'a ProximityPrior,
    pub pois: &'a PoiSet,
}

impl RankingMethod for JointMethod<'_> {
    fn name(&self) -> &str {
        JOINT
    }

    fn rank(&self, split: &DatasetSplit, candidates: &PoiSet, target: TargetRef) -> Result<ForecastRanking> {
        let dist = self.predictor.predict(split, self.pois, target)?;
        let user = &split.histories[target.user].user_id;
        rank_joint(
            user,
            &dist,
            &self.predictor.model.vocab,
            self.prior,
            anchor(split, self.pois, target)?,
            candidates,
        )
    }
}

/// Direct POI classifier over the training vocabulary.
pub struct BaselineMethod<'a> {
    pub predictor: &'a Predictor,
    pub pois: &'a PoiSet,
}

impl RankingMethod for BaselineMethod<'_> {
    fn name(&self) -> &str {
        BASELINE
    }

    fn rank(&self, split: &DatasetSplit, candidates: &PoiSet, target: TargetRef) -> Result<ForecastRanking> {
        let dist = self.predictor.predict(split, self.pois, target)?;
        let user = &split.histories[target.user].user_id;
        let anchor = anchor(split, self.pois, target)?;
        rank_baseline(user, &anchor.poi_id, &dist, &self.predictor.model.vocab, candidates)
    }
}

/// Fraction of rankings whose truth is among the top `k`.
pub fn accuracy_at_k(rankings: &[(ForecastRanking, String)], k: usize) -> Result<f64> {
    if rankings.is_empty() {
        return Err(Error::contract("no targets to score"));
    }
    let hits = rankings
        .iter()
        .filter(|(r, truth)| top_k(r, k).contains(&truth.as_str()))
        .count();
    Ok(hits as f64 / rankings.len() as f64)
}

fn accuracy_from_ranks(ranks: &[Option<usize>], ks: &[usize]) -> BTreeMap<usize, f64> {
    ks.iter()
        .map(|&k| {
            let hits = ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count();
            (k, hits as f64 / ranks.len() as f64)
        })
        .collect()
}

/// Top-k accuracies of one method on the test targets of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub threshold: i64,
    pub unseen_ratio: f64,
    pub acc_at: BTreeMap<usize, f64>,
    /// Absent when no test target is unseen.
    pub unseen_acc_at: Option<BTreeMap<usize, f64>>,
    pub target_count: usize,
    pub unseen_target_count: usize,
}

fn check_ks(ks: &[usize]) -> Result<Vec<usize>> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::config("k values must be positive and non-empty"));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    Ok(ks)
}

/// Ranks every test target against `candidates`. The unseen subset filters
/// targets, not candidates.
pub fn evaluate(
    method: &dyn RankingMethod,
    split: &DatasetSplit,
    candidates: &PoiSet,
    ks: &[usize],
) -> Result<EvalReport> {
    let ks = check_ks(ks)?;
    if split.test.is_empty() {
        return Err(Error::contract("split has no test targets"));
    }
    let ranks: Vec<(Option<usize>, bool)> = split
        .test
        .par_iter()
        .map(|&t| {
            let r = method.rank(split, candidates, t)?;
            Ok((r.rank_of(split.target_poi(t)), split.is_unseen_target(t)))
        })
        .collect::<Result<_>>()?;
    let all: Vec<Option<usize>> = ranks.iter().map(|r| r.0).collect();
    let unseen: Vec<Option<usize>> = ranks.iter().filter(|r| r.1).map(|r| r.0).collect();
    if unseen.is_empty() {
        log::warn!("no unseen test targets; unseen accuracy omitted for {}", method.name());
    }
    Ok(EvalReport {
        method: method.name().to_string(),
        threshold: split.threshold,
        unseen_ratio: split.unseen_ratio(),
        acc_at: accuracy_from_ranks(&all, &ks),
        unseen_acc_at: (!unseen.is_empty()).then(|| accuracy_from_ranks(&unseen, &ks)),
        target_count: all.len(),
        unseen_target_count: unseen.len(),
    })
}

#[derive(Serialize)]
struct DumpEntry<'a> {
    poi_id: &'a str,
    score: f64,
}

#[derive(Serialize)]
struct DumpLine<'a> {
    user_id: &'a str,
    anchor_poi: &'a str,
    truth_poi: &'a str,
    truth_rank: Option<usize>,
    topk: Vec<DumpEntry<'a>>,
}

/// Writes one JSON line per test target with the `top` best candidates.
pub fn dump_rankings<W: Write>(
    method: &dyn RankingMethod,
    split: &DatasetSplit,
    candidates: &PoiSet,
    top: usize,
    mut out: W,
) -> Result<()> {
    let rankings: Vec<ForecastRanking> = split
        .test
        .par_iter()
        .map(|&t| method.rank(split, candidates, t))
        .collect::<Result<_>>()?;
    for (&t, r) in split.test.iter().zip(&rankings) {
        let truth = split.target_poi(t);
        let line = DumpLine {
            user_id: &r.user_id,
            anchor_poi: &r.anchor_poi,
            truth_poi: truth,
            truth_rank: r.rank_of(truth),
            topk: r
                .order
                .iter()
                .take(top)
                .map(|&i| DumpEntry {
                    poi_id: &r.candidates[i],
                    score: r.scores[i],
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
