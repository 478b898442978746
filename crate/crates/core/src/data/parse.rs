//! Reader for the tab-separated check-in dump.
//!
//! Columns: user id, venue id, venue category id, venue category name,
//! latitude, longitude, timezone offset (minutes), UTC time string
//! (`Tue Apr 03 18:00:09 +0000 2012`).

use std::io::BufRead;

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use super::{group_histories, Poi, PoiRecord, PoiSet, UserHistory, UtmZone, Visit};
use crate::error::{Error, Result};

const TIME_FORMAT: &str = "%a %b %d %H:%M:%S %z %Y";
const MAX_SAMPLES: usize = 5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestFormat {
    pub delimiter: char,
    /// Fraction of malformed lines above which ingestion fails.
    pub max_malformed_fraction: f64,
    /// Projection zone; derived from the POI centroid when absent.
    pub zone: Option<UtmZone>,
}

impl Default for IngestFormat {
    fn default() -> Self {
        IngestFormat {
            delimiter: '\t',
            max_malformed_fraction: 0.10,
            zone: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub lines: usize,
    pub malformed: usize,
    pub visits: usize,
    pub users: usize,
    pub pois: usize,
    pub categories: usize,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub pois: PoiSet,
    pub histories: Vec<UserHistory>,
    pub stats: IngestStats,
}

struct Row {
    poi: PoiRecord,
    visit: Visit,
}

fn parse_line(line: &str, delimiter: char) -> Option<Row> {
    let cols: Vec<&str> = line.split(delimiter).collect();
    if cols.len() != 8 {
        return None;
    }
    let user_id = cols[0].trim();
    let poi_id = cols[1].trim();
    let category_id = cols[2].trim();
    if user_id.is_empty() || poi_id.is_empty() || category_id.is_empty() {
        return None;
    }
    let lat: f64 = cols[4].trim().parse().ok()?;
    let lon: f64 = cols[5].trim().parse().ok()?;
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return None;
    }
    let tz_offset_minutes: i32 = cols[6].trim().parse().ok()?;
    let timestamp = DateTime::parse_from_str(cols[7].trim(), TIME_FORMAT)
        .ok()?
        .timestamp();
    Some(Row {
        poi: PoiRecord {
            poi_id: poi_id.to_string(),
            lat,
            lon,
            category_id: category_id.to_string(),
        },
        visit: Visit {
            user_id: user_id.to_string(),
            timestamp,
            poi_id: poi_id.to_string(),
            tz_offset_minutes,
        },
    })
}

/// Parses a check-in stream into a deduplicated POI set and per-user
/// histories. Blank lines are ignored; malformed lines are skipped and
/// counted.
pub fn parse_checkins<R: BufRead>(reader: R, format: &IngestFormat) -> Result<Ingested> {
    let mut pois = Vec::new();
    let mut visits = Vec::new();
    let mut lines = 0usize;
    let mut malformed = 0usize;
    let mut samples = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_start_matches('\u{feff}').trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        match parse_line(line, format.delimiter) {
            Some(row) => {
                pois.push(row.poi);
                visits.push(row.visit);
            }
            None => {
                malformed += 1;
                if samples.len() < MAX_SAMPLES {
                    samples.push(format!("line {}: {}", lineno + 1, truncate(line, 120)));
                }
            }
        }
    }

    if lines > 0 && malformed as f64 > format.max_malformed_fraction * lines as f64 {
        return Err(Error::TooManyMalformed {
            malformed,
            total: lines,
            samples,
        });
    }
    if malformed > 0 {
        log::warn!("skipped {malformed} malformed lines of {lines}; e.g. {samples:?}");
    }

    let visit_count = visits.len();
    let pois = PoiSet::from_records(pois, format.zone);
    let histories = group_histories(visits);
    let stats = IngestStats {
        lines,
        malformed,
        visits: visit_count,
        users: histories.len(),
        pois: pois.len(),
        categories: pois.category_vocabulary().len(),
    };
    Ok(Ingested {
        pois,
        histories,
        stats,
    })
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Renders one visit in the input layout. Used by the synthetic generators
/// so their output goes through the same reader as real data.
pub fn format_checkin(visit: &Visit, poi: &Poi, category_name: &str) -> String {
    let time = DateTime::from_timestamp(visit.timestamp, 0)
        .expect("timestamp in chrono range")
        .format("%a %b %d %H:%M:%S +0000 %Y");
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        visit.user_id,
        visit.poi_id,
        poi.category_id,
        category_name,
        poi.lat,
        poi.lon,
        visit.tz_offset_minutes,
        time
    )
}
