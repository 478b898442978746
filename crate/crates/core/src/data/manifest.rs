//! On-disk JSON form of a [`DatasetSplit`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{DatasetSplit, Partition, TargetRef, UserHistory};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetAssignment {
    pub user_id: String,
    pub position: usize,
    pub timestamp: i64,
    pub poi_id: String,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub version: u32,
    pub threshold: i64,
    pub seed: u64,
    pub unseen_poi_ids: Vec<String>,
    pub targets: Vec<TargetAssignment>,
}

impl SplitManifest {
    pub fn from_split(split: &DatasetSplit) -> Self {
        let mut targets: Vec<(TargetRef, Partition)> = split
            .validation
            .iter()
            .map(|&t| (t, Partition::Validation))
            .chain(split.test.iter().map(|&t| (t, Partition::Test)))
            .collect();
        targets.sort_by_key(|(t, _)| *t);
        SplitManifest {
            version: MANIFEST_VERSION,
            threshold: split.threshold,
            seed: split.seed,
            unseen_poi_ids: split.unseen_poi_ids.iter().cloned().collect(),
            targets: targets
                .into_iter()
                .map(|(t, partition)| {
                    let h = &split.histories[t.user];
                    let v = &h.visits[t.position];
                    TargetAssignment {
                        user_id: h.user_id.clone(),
                        position: t.position,
                        timestamp: v.timestamp,
                        poi_id: v.poi_id.clone(),
                        partition,
                    }
                })
                .collect(),
        }
    }

    /// Rebuilds the split against `histories`, checking that every recorded
    /// target still points at the same visit.
    pub fn to_split(&self, histories: &[UserHistory]) -> Result<DatasetSplit> {
        let bad = |detail: String| Error::Format {
            what: "split manifest",
            detail,
        };
        if self.version != MANIFEST_VERSION {
            return Err(bad(format!("unsupported version {}", self.version)));
        }
        let user_index: std::collections::HashMap<&str, usize> = histories
            .iter()
            .enumerate()
            .map(|(i, h)| (h.user_id.as_str(), i))
            .collect();

        let mut validation = Vec::new();
        let mut test = Vec::new();
        for a in &self.targets {
            let user = *user_index
                .get(a.user_id.as_str())
                .ok_or_else(|| bad(format!("unknown user {}", a.user_id)))?;
            let v = histories[user]
                .visits
                .get(a.position)
                .ok_or_else(|| bad(format!("user {} has no visit {}", a.user_id, a.position)))?;
            if v.timestamp != a.timestamp || v.poi_id != a.poi_id {
                return Err(bad(format!(
                    "target {}#{} does not match the data",
                    a.user_id, a.position
                )));
            }
            let t = TargetRef {
                user,
                position: a.position,
            };
            match a.partition {
                Partition::Validation => validation.push(t),
                Partition::Test => test.push(t),
            }
        }
        validation.sort();
        test.sort();

        let train = histories
            .iter()
            .filter_map(|h| {
                let visits: Vec<_> = h
                    .visits
                    .iter()
                    .filter(|v| v.timestamp < self.threshold)
                    .cloned()
                    .collect();
                (!visits.is_empty()).then(|| UserHistory {
                    user_id: h.user_id.clone(),
                    visits,
                })
            })
            .collect();

        Ok(DatasetSplit {
            threshold: self.threshold,
            seed: self.seed,
            histories: histories.to_vec(),
            train,
            validation,
            test,
            unseen_poi_ids: self.unseen_poi_ids.iter().cloned().collect::<BTreeSet<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{temporal_split, Visit};
    use proptest::prelude::*;

    fn histories(rows: &[(u8, Vec<(u32, u8)>)]) -> Vec<UserHistory> {
        let visits = rows.iter().flat_map(|(u, vs)| {
            vs.iter().map(move |&(t, p)| Visit {
                user_id: format!("u{u}"),
                timestamp: 1_000_000_000 + i64::from(t),
                poi_id: format!("p{p}"),
                tz_offset_minutes: 0,
            })
        });
        crate::data::group_histories(visits)
    }

    proptest! {
        #[test]
        fn manifest_round_trip_is_exact(
            rows in proptest::collection::vec(
                (0u8..6, proptest::collection::vec((0u32..1000, 0u8..15), 3..12)),
                1..6,
            ),
            cut in 100u32..900,
            seed in any::<u64>(),
        ) {
            let hs = histories(&rows);
            let Ok(split) = temporal_split(&hs, 1_000_000_000 + i64::from(cut), seed) else {
                return Ok(());
            };
            let manifest = SplitManifest::from_split(&split);
            let json = serde_json::to_string(&manifest).unwrap();
            let back: SplitManifest = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&back, &manifest);
            prop_assert_eq!(back.to_split(&hs).unwrap(), split);
        }
    }

    #[test]
    fn mismatched_data_is_rejected() {
        let hs = histories(&[(0, vec![(1, 1), (2, 2), (3, 3), (40, 4)])]);
        let split = temporal_split(&hs, 1_000_000_010, 0).unwrap();
        let mut manifest = SplitManifest::from_split(&split);
        manifest.targets[0].poi_id = "elsewhere".into();
        assert!(matches!(manifest.to_split(&hs), Err(Error::Format { .. })));
    }
}
