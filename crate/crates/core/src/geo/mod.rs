//! Proximity prior: the distribution of planar distances between a user's
//! consecutive visits, discretized into fixed-width buckets.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Poi, PoiSet, UserHistory};
use crate::error::{Error, Result};

/// Euclidean distance between projected coordinates, in kilometers.
pub fn planar_distance(a: &Poi, b: &Poi) -> f64 {
    (a.easting - b.easting).hypot(a.northing - b.northing) / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBucketing {
    pub bucket_width_km: f64,
    pub max_distance_km: f64,
}

impl Default for DistanceBucketing {
    fn default() -> Self {
        DistanceBucketing {
            bucket_width_km: 0.5,
            max_distance_km: 30.0,
        }
    }
}

impl DistanceBucketing {
    pub fn new(bucket_width_km: f64, max_distance_km: f64) -> Result<Self> {
        let b = DistanceBucketing {
            bucket_width_km,
            max_distance_km,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bucket_width_km > 0.0 && self.bucket_width_km.is_finite()) {
            return Err(Error::config("bucket width must be positive"));
        }
        if !(self.max_distance_km > 0.0 && self.max_distance_km.is_finite()) {
            return Err(Error::config("max distance must be positive"));
        }
        Ok(())
    }

    /// Regular buckets plus one overflow bucket.
    pub fn bucket_count(&self) -> usize {
        (self.max_distance_km / self.bucket_width_km).ceil() as usize + 1
    }

    pub fn bucket(&self, distance_km: f64) -> usize {
        let overflow = self.bucket_count() - 1;
        let b = (distance_km.max(0.0) / self.bucket_width_km).floor();
        if b >= overflow as f64 {
            overflow
        } else {
            b as usize
        }
    }

    /// `[lower, upper)` of bucket `b`; the overflow bucket is unbounded.
    pub fn bounds(&self, b: usize) -> (f64, f64) {
        let lower = b as f64 * self.bucket_width_km;
        if b + 1 >= self.bucket_count() {
            (lower, f64::INFINITY)
        } else {
            (lower, (b + 1) as f64 * self.bucket_width_km)
        }
    }
}

/// Smoothed, normalized distance-bucket distribution. Counts are the source
/// of truth; probabilities are derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityPrior {
    bucketing: DistanceBucketing,
    counts: Vec<u64>,
    probabilities: Vec<f64>,
    smoothing_alpha: f64,
}

impl ProximityPrior {
    pub fn from_counts(
        bucketing: DistanceBucketing,
        counts: Vec<u64>,
        smoothing_alpha: f64,
    ) -> Result<Self> {
        bucketing.validate()?;
        if counts.len() != bucketing.bucket_count() {
            return Err(Error::contract(format!(
                "{} counts for {} buckets",
                counts.len(),
                bucketing.bucket_count()
            )));
        }
        if !(smoothing_alpha >= 0.0 && smoothing_alpha.is_finite()) {
            return Err(Error::config("smoothing alpha must be non-negative"));
        }
        let total: u64 = counts.iter().sum();
        let denom = total as f64 + smoothing_alpha * counts.len() as f64;
        if denom <= 0.0 {
            return Err(Error::EmptyPrior);
        }
        let probabilities = counts
            .iter()
            .map(|&c| (c as f64 + smoothing_alpha) / denom)
            .collect();
        Ok(ProximityPrior {
            bucketing,
            counts,
            probabilities,
            smoothing_alpha,
        })
    }

    pub fn bucketing(&self) -> &DistanceBucketing {
        &self.bucketing
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn smoothing_alpha(&self) -> f64 {
        self.smoothing_alpha
    }

    pub fn total_pairs(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Probability that the next visit lies in the same distance band from
    /// `anchor` as `candidate` does.
    pub fn prior_probability(&self, anchor: &Poi, candidate: &Poi) -> f64 {
        self.probabilities[self.bucketing.bucket(planar_distance(anchor, candidate))]
    }

    /// Sums the counts of two priors over the same bucketing.
    pub fn merge(&self, other: &ProximityPrior) -> Result<ProximityPrior> {
        if self.bucketing != other.bucketing {
            return Err(Error::contract("merging priors with different bucketing"));
        }
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a + b)
            .collect();
        ProximityPrior::from_counts(self.bucketing, counts, self.smoothing_alpha)
    }

    pub fn to_json(&self) -> PriorFile {
        PriorFile {
            bucket_width_km: self.bucketing.bucket_width_km,
            max_distance_km: self.bucketing.max_distance_km,
            smoothing_alpha: self.smoothing_alpha,
            counts: self.counts.clone(),
        }
    }

    pub fn from_json(file: &PriorFile) -> Result<Self> {
        ProximityPrior::from_counts(
            DistanceBucketing::new(file.bucket_width_km, file.max_distance_km)?,
            file.counts.clone(),
            file.smoothing_alpha,
        )
    }

    /// Histogram of raw counts: `bucket_lower_km,bucket_upper_km,count`.
    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bucket_lower_km,bucket_upper_km,count")?;
        for (b, c) in self.counts.iter().enumerate() {
            let (lo, hi) = self.bucketing.bounds(b);
            if hi.is_finite() {
                writeln!(out, "{lo},{hi},{c}")?;
            } else {
                writeln!(out, "{lo},inf,{c}")?;
            }
        }
        Ok(())
    }
}

/// Persisted prior. Probabilities are recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorFile {
    pub bucket_width_km: f64,
    pub max_distance_km: f64,
    pub smoothing_alpha: f64,
    pub counts: Vec<u64>,
}

/// Raw bucket counts of consecutive same-user visit distances.
pub fn count_pairs(
    histories: &[UserHistory],
    pois: &PoiSet,
    bucketing: &DistanceBucketing,
) -> Result<Vec<u64>> {
    histories
        .par_iter()
        .map(|h| {
            let mut counts = vec![0u64; bucketing.bucket_count()];
            for pair in h.visits.windows(2) {
                let a = lookup(pois, &pair[0].poi_id)?;
                let b = lookup(pois, &pair[1].poi_id)?;
                counts[bucketing.bucket(planar_distance(a, b))] += 1;
            }
            Ok(counts)
        })
        .try_reduce(
            || vec![0u64; bucketing.bucket_count()],
            |mut acc, c| {
                acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
                Ok(acc)
            },
        )
}

fn lookup<'a>(pois: &'a PoiSet, id: &str) -> Result<&'a Poi> {
    pois.get(id)
        .ok_or_else(|| Error::contract(format!("visit references unknown POI {id}")))
}

/// Estimates the prior from training histories. Pairs never cross users.
pub fn estimate_prior(
    train: &[UserHistory],
    pois: &PoiSet,
    bucketing: DistanceBucketing,
    smoothing_alpha: f64,
) -> Result<ProximityPrior> {
    bucketing.validate()?;
    let counts = count_pairs(train, pois, &bucketing)?;
    if counts.iter().sum::<u64>() == 0 {
        return Err(Error::EmptyPrior);
    }
    ProximityPrior::from_counts(bucketing, counts, smoothing_alpha)
}
