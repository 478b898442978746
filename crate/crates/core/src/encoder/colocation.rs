//! User-by-POI visit counts and cosine neighbour selection.

use std::collections::{BTreeMap, HashMap};

use crate::data::{PoiSet, UserHistory};

/// Sparse `m × C_P` matrix of training visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CoLocationMatrix {
    users: Vec<String>,
    user_index: HashMap<String, usize>,
    poi_index: HashMap<String, usize>,
    poi_count: usize,
    rows: Vec<BTreeMap<usize, u64>>,
    norms: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub user: usize,
    pub similarity: f64,
}

/// Builds the matrix over `users` (row order) and all POIs of `pois`
/// (column order). Users without training visits get an all-zero row.
pub fn build_colocation(users: &[String], train: &[UserHistory], pois: &PoiSet) -> CoLocationMatrix {
    let user_index: HashMap<String, usize> = users
        .iter()
        .enumerate()
        .map(|(i, u)| (u.clone(), i))
        .collect();
    let poi_index: HashMap<String, usize> = pois
        .iter()
        .enumerate()
        .map(|(i, p)| (p.poi_id.clone(), i))
        .collect();
    let mut rows = vec![BTreeMap::new(); users.len()];
    for h in train {
        let Some(&u) = user_index.get(&h.user_id) else {
            continue;
        };
        for v in &h.visits {
            if let Some(&j) = poi_index.get(&v.poi_id) {
                *rows[u].entry(j).or_insert(0u64) += 1;
            }
        }
    }
    let norms = rows
        .iter()
        .map(|r| r.values().map(|&c| (c * c) as f64).sum::<f64>().sqrt())
        .collect();
    CoLocationMatrix {
        users: users.to_vec(),
        user_index,
        poi_count: pois.len(),
        poi_index,
        rows,
        norms,
    }
}

impl CoLocationMatrix {
    pub fn shape(&self) -> (usize, usize) {
        (self.users.len(), self.poi_count)
    }

    pub fn user_index(&self, user_id: &str) -> Option<usize> {
        self.user_index.get(user_id).copied()
    }

    pub fn poi_index(&self, poi_id: &str) -> Option<usize> {
        self.poi_index.get(poi_id).copied()
    }

    pub fn entry(&self, user: usize, poi: usize) -> u64 {
        self.rows[user].get(&poi).copied().unwrap_or(0)
    }

    pub fn row_sum(&self, user: usize) -> u64 {
        self.rows[user].values().sum()
    }

    /// Cosine similarity of two rows; 0 when either row is all zero.
    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        if self.norms[a] == 0.0 || self.norms[b] == 0.0 {
            return 0.0;
        }
        let (small, large) = if self.rows[a].len() <= self.rows[b].len() {
            (&self.rows[a], &self.rows[b])
        } else {
            (&self.rows[b], &self.rows[a])
        };
        let dot: u64 = small
            .iter()
            .filter_map(|(j, &x)| large.get(j).map(|&y| x * y))
            .sum();
        dot as f64 / (self.norms[a] * self.norms[b])
    }

    /// The `k` most similar other users, by descending similarity and then
    /// ascending index.
    pub fn select_neighbors(&self, user: usize, k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = (0..self.users.len())
            .filter(|&o| o != user)
            .map(|o| Neighbor {
                user: o,
                similarity: self.cosine(user, o),
            })
            .collect();
        all.sort_by(|a, b| {
            b.similarity
                .total_cmp(&a.similarity)
                .then(a.user.cmp(&b.user))
        });
        all.truncate(k);
        all
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{PoiRecord, Visit};
    use proptest::prelude::*;

    fn pois(n: usize) -> PoiSet {
        PoiSet::from_records(
            (0..n)
                .map(|i| PoiRecord {
                    poi_id: format!("p{i}"),
                    lat: 40.7,
                    lon: -74.0,
                    category_id: "c".into(),
                })
                .collect(),
            None,
        )
    }

    fn hist(user: &str, seq: &[usize]) -> UserHistory {
        UserHistory {
            user_id: user.into(),
            visits: seq
                .iter()
                .enumerate()
                .map(|(t, p)| Visit {
                    user_id: user.into(),
                    timestamp: t as i64,
                    poi_id: format!("p{p}"),
                    tz_offset_minutes: 0,
                })
                .collect(),
        }
    }

    fn users(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("u{i}")).collect()
    }

    #[test]
    fn three_user_counts() {
        let train = vec![hist("u0", &[0, 0, 1]), hist("u2", &[2, 1, 2, 2])];
        let m = build_colocation(&users(3), &train, &pois(3));
        assert_eq!(m.shape(), (3, 3));
        let dense: Vec<Vec<u64>> = (0..3).map(|u| (0..3).map(|p| m.entry(u, p)).collect()).collect();
        assert_eq!(dense, vec![vec![2, 1, 0], vec![0, 0, 0], vec![0, 1, 3]]);
        assert_eq!(m.row_sum(0), 3);
        assert_eq!(m.row_sum(1), 0);
        assert_eq!(m.row_sum(2), 4);
    }

    #[test]
    fn identical_and_orthogonal_rows() {
        let train = vec![
            hist("u0", &[0, 1, 1]),
            hist("u1", &[1, 0, 1]),
            hist("u2", &[2, 3]),
        ];
        let m = build_colocation(&users(4), &train, &pois(4));
        assert!((m.cosine(0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(m.cosine(0, 2), 0.0);
        assert_eq!(m.cosine(0, 3), 0.0);
        let n = m.select_neighbors(0, 2);
        assert_eq!(n[0].user, 1);
        assert_eq!(n[1].user, 2, "ties at zero break by index");
        assert_eq!(m.select_neighbors(0, 10).len(), 3);
        assert!(m.select_neighbors(0, 0).is_empty());
    }

    fn brute_cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }

    #[test]
    fn four_user_order_matches_brute_force() {
        let dense = [
            [3.0, 1.0, 0.0, 0.0],
            [2.0, 1.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, 4.0],
            [1.0, 0.0, 0.0, 1.0],
        ];
        let train: Vec<UserHistory> = dense
            .iter()
            .enumerate()
            .map(|(u, row)| {
                let seq: Vec<usize> = row
                    .iter()
                    .enumerate()
                    .flat_map(|(p, &c)| std::iter::repeat_n(p, c as usize))
                    .collect();
                hist(&format!("u{u}"), &seq)
            })
            .collect();
        let m = build_colocation(&users(4), &train, &pois(4));
        for u in 0..4 {
            let mut expected: Vec<(usize, f64)> = (0..4)
                .filter(|&o| o != u)
                .map(|o| (o, brute_cosine(&dense[u], &dense[o])))
                .collect();
            expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let got: Vec<usize> = m.select_neighbors(u, 3).iter().map(|n| n.user).collect();
            assert_eq!(got, expected.iter().map(|e| e.0).collect::<Vec<_>>());
            for n in m.select_neighbors(u, 3) {
                assert!((n.similarity - brute_cosine(&dense[u], &dense[n.user])).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_and_rows_sum(seqs in proptest::collection::vec(proptest::collection::vec(0usize..6, 0..10), 2..6)) {
            let train: Vec<UserHistory> = seqs
                .iter()
                .enumerate()
                .filter(|(_, s)| !s.is_empty())
                .map(|(u, s)| hist(&format!("u{u}"), s))
                .collect();
            let m = build_colocation(&users(seqs.len()), &train, &pois(6));
            for a in 0..seqs.len() {
                prop_assert_eq!(m.row_sum(a), seqs[a].len() as u64);
                for b in 0..seqs.len() {
                    prop_assert_eq!(m.cosine(a, b), m.cosine(b, a));
                }
            }
        }
    }
}
