//! Check-in data model: POIs, visits, per-user histories and temporal splits.

mod manifest;
mod parse;
mod projection;
mod split;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use manifest::{SplitManifest, TargetAssignment};
pub use parse::{format_checkin, parse_checkins, IngestFormat, IngestStats, Ingested};
pub use projection::UtmZone;
pub use split::{
    find_threshold_for_unseen_ratio, temporal_split, unseen_ratio, DatasetSplit, Partition,
    TargetRef, ThresholdChoice, MIN_PRECEDING_VISITS,
};

/// A point of interest with its projected planar coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub poi_id: String,
    pub lat: f64,
    pub lon: f64,
    pub category_id: String,
    pub easting: f64,
    pub northing: f64,
}

/// Unprojected POI as read from the source data.
#[derive(Debug, Clone, PartialEq)]
pub struct PoiRecord {
    pub poi_id: String,
    pub lat: f64,
    pub lon: f64,
    pub category_id: String,
}

/// The POI universe of one run, projected into a single UTM zone.
#[derive(Debug, Clone)]
pub struct PoiSet {
    pois: Vec<Poi>,
    index: HashMap<String, usize>,
    category_vocabulary: Vec<String>,
    zone: Option<UtmZone>,
}

impl PoiSet {
    /// Builds the set from raw records. Later duplicates of a `poi_id` are
    /// dropped. Without `zone`, the zone is taken from the record centroid.
    pub fn from_records(records: Vec<PoiRecord>, zone: Option<UtmZone>) -> Self {
        let mut seen = HashMap::new();
        let mut unique = Vec::with_capacity(records.len());
        for rec in records {
            if !seen.contains_key(&rec.poi_id) {
                seen.insert(rec.poi_id.clone(), unique.len());
                unique.push(rec);
            }
        }
        let zone = zone.or_else(|| UtmZone::from_centroid(unique.iter().map(|r| (r.lat, r.lon))));
        let mut outside = 0usize;
        let pois: Vec<Poi> = unique
            .into_iter()
            .map(|r| {
                let (easting, northing) = match zone {
                    Some(z) => {
                        if !z.covers(r.lon) {
                            outside += 1;
                        }
                        z.project(r.lat, r.lon)
                    }
                    None => (0.0, 0.0),
                };
                Poi {
                    poi_id: r.poi_id,
                    lat: r.lat,
                    lon: r.lon,
                    category_id: r.category_id,
                    easting,
                    northing,
                }
            })
            .collect();
        if outside > 0 {
            log::warn!(
                "{outside} POIs fall outside UTM zone {:?}; projecting anyway",
                zone.map(|z| z.number)
            );
        }
        let mut category_vocabulary: Vec<String> =
            pois.iter().map(|p| p.category_id.clone()).collect();
        category_vocabulary.sort();
        category_vocabulary.dedup();
        PoiSet {
            pois,
            index: seen,
            category_vocabulary,
            zone,
        }
    }

    pub fn empty() -> Self {
        Self::from_records(Vec::new(), None)
    }

    pub fn len(&self) -> usize {
        self.pois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pois.is_empty()
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Poi> {
        self.pois.iter()
    }

    pub fn get(&self, poi_id: &str) -> Option<&Poi> {
        self.index.get(poi_id).map(|&i| &self.pois[i])
    }

    pub fn contains(&self, poi_id: &str) -> bool {
        self.index.contains_key(poi_id)
    }

    /// Sorted, distinct category ids; position is the class index.
    pub fn category_vocabulary(&self) -> &[String] {
        &self.category_vocabulary
    }

    pub fn zone(&self) -> Option<UtmZone> {
        self.zone
    }

    /// A candidate set restricted to the POIs accepted by `keep`.
    /// Coordinates and the category vocabulary are carried over unchanged.
    pub fn filtered<F: Fn(&Poi) -> bool>(&self, keep: F) -> PoiSet {
        let pois: Vec<Poi> = self.pois.iter().filter(|p| keep(p)).cloned().collect();
        let index = pois
            .iter()
            .enumerate()
            .map(|(i, p)| (p.poi_id.clone(), i))
            .collect();
        PoiSet {
            pois,
            index,
            category_vocabulary: self.category_vocabulary.clone(),
            zone: self.zone,
        }
    }
}

/// One check-in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub user_id: String,
    /// UTC seconds.
    pub timestamp: i64,
    pub poi_id: String,
    /// Local time offset from UTC, used for temporal features.
    pub tz_offset_minutes: i32,
}

impl Visit {
    /// Hour of the local week, Monday 00:00 = 0, range 0..168.
    pub fn hour_of_week(&self) -> usize {
        let local = self.timestamp + i64::from(self.tz_offset_minutes) * 60;
        // 1970-01-01 was a Thursday (day 3 when Monday = 0).
        let days = local.div_euclid(86_400);
        let weekday = (days + 3).rem_euclid(7);
        let hour = local.rem_euclid(86_400) / 3600;
        (weekday * 24 + hour) as usize
    }
}

/// A user's check-ins in non-decreasing timestamp order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserHistory {
    pub user_id: String,
    pub visits: Vec<Visit>,
}

impl UserHistory {
    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }
}

/// Groups visits by user, sorting each history stably by timestamp and the
/// users by id.
pub fn group_histories<I: IntoIterator<Item = Visit>>(visits: I) -> Vec<UserHistory> {
    let mut by_user: std::collections::BTreeMap<String, Vec<Visit>> = Default::default();
    for v in visits {
        by_user.entry(v.user_id.clone()).or_default().push(v);
    }
    by_user
        .into_iter()
        .map(|(user_id, mut visits)| {
            visits.sort_by_key(|v| v.timestamp);
            UserHistory { user_id, visits }
        })
        .collect()
}
