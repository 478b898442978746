//! Synthetic check-in generators with a known optimum.
//!
//! POIs sit in clusters spaced several kilometres apart, one POI per
//! category per cluster (a *slot*). A user's next category follows a fixed
//! Markov chain and the next POI is the nearest slot of that category, so
//! the best achievable accuracy follows from the chain alone. Slots can be
//! re-issued under new ids (venue churn), which is what makes POIs unseen.

use std::collections::BTreeMap;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::data::{format_checkin, group_histories, PoiRecord, PoiSet, UserHistory, Visit};
use crate::error::{Error, Result};

const BASE_TIME: i64 = 1_333_411_200;
const ORIGIN: (f64, f64) = (40.70, -74.00);
const KM_PER_DEG_LAT: f64 = 111.2;

/// Row-stochastic category transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    pub transition: Vec<Vec<f64>>,
}

impl MarkovChain {
    /// Moves to the next category (cyclically) with probability `p_next`,
    /// otherwise to one of the other categories uniformly.
    pub fn cyclic(states: usize, p_next: f64) -> Result<Self> {
        if states < 3 || !(0.0..=1.0).contains(&p_next) {
            return Err(Error::config("cyclic chain needs >= 3 states and p_next in [0, 1]"));
        }
        let rest = (1.0 - p_next) / (states - 1) as f64;
        let transition = (0..states)
            .map(|i| (0..states).map(|j| if j == (i + 1) % states { p_next } else { rest }).collect())
            .collect();
        Ok(MarkovChain { transition })
    }

    pub fn states(&self) -> usize {
        self.transition.len()
    }

    /// Stationary distribution by power iteration.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.states();
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..10_000 {
            let next: Vec<f64> = (0..n)
                .map(|j| (0..n).map(|i| pi[i] * self.transition[i][j]).sum())
                .collect();
            let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if delta < 1e-15 {
                break;
            }
        }
        pi
    }

    /// Accuracy of always predicting the most likely successor.
    pub fn bayes_rate(&self) -> f64 {
        self.stationary()
            .iter()
            .zip(&self.transition)
            .map(|(p, row)| p * row.iter().cloned().fold(0.0, f64::max))
            .sum()
    }
}

/// How slots are re-issued under new POI ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Churn {
    None,
    /// At `at_fraction` of the horizon, `fraction` of all slots get a new id.
    Swap { at_fraction: f64, fraction: f64 },
    /// Every slot is re-issued as a Poisson process with this many expected
    /// replacements over the horizon.
    Poisson { replacements_per_slot: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub clusters: usize,
    pub cluster_spacing_km: f64,
    /// Maximum distance of a slot from its cluster centre.
    pub slot_radius_km: f64,
    pub categories: usize,
    /// Probability of moving to the successor category.
    pub p_next: f64,
    /// Probability that a visit happens in a random other cluster.
    pub travel_probability: f64,
    pub users: usize,
    pub visits_per_user: usize,
    pub horizon_days: f64,
    pub churn: Churn,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            clusters: 8,
            cluster_spacing_km: 5.0,
            slot_radius_km: 0.3,
            categories: 6,
            p_next: 0.9,
            travel_probability: 0.0,
            users: 120,
            visits_per_user: 80,
            horizon_days: 300.0,
            churn: Churn::Swap {
                at_fraction: 0.7,
                fraction: 0.5,
            },
            seed: 17,
        }
    }
}

impl SyntheticConfig {
    /// Half the slots swapped for new ids at 70% of the horizon.
    pub fn swap() -> Self {
        Self::default()
    }

    /// Continuous venue turnover, so any unseen ratio can be reached by
    /// moving the split threshold.
    pub fn churn() -> Self {
        SyntheticConfig {
            travel_probability: 0.05,
            users: 200,
            visits_per_user: 100,
            churn: Churn::Poisson {
                replacements_per_slot: 6.0,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.users == 0 || self.visits_per_user < 3 {
            return Err(Error::config("need clusters, users and at least 3 visits per user"));
        }
        if self.clusters == 1 && self.travel_probability > 0.0 {
            return Err(Error::config("travel needs at least two clusters"));
        }
        if !(self.horizon_days > 0.0) || !(0.0..=1.0).contains(&self.travel_probability) {
            return Err(Error::config("invalid horizon or travel probability"));
        }
        match self.churn {
            Churn::Swap { at_fraction, fraction }
                if !(0.0..1.0).contains(&at_fraction) || !(0.0..=1.0).contains(&fraction) =>
            {
                Err(Error::config("swap fractions must lie in [0, 1)"))
            }
            Churn::Poisson { replacements_per_slot } if !(replacements_per_slot >= 0.0) => {
                Err(Error::config("replacement rate must be non-negative"))
            }
            _ => MarkovChain::cyclic(self.categories, self.p_next).map(|_| ()),
        }
    }
}

/// One id of a slot and the time span it is open, `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub poi_id: String,
    pub slot: usize,
    pub start: i64,
    pub end: i64,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: SyntheticConfig,
    pub chain: MarkovChain,
    /// Every generation of every slot.
    pub pois: PoiSet,
    pub generations: Vec<Generation>,
    pub visits: Vec<Visit>,
    pub category_names: Vec<String>,
    /// Swap instant for [`Churn::Swap`].
    pub swap_time: Option<i64>,
}

impl SyntheticDataset {
    pub fn histories(&self) -> Vec<UserHistory> {
        group_histories(self.visits.iter().cloned())
    }

    /// POIs open at time `t`.
    pub fn active_at(&self, t: i64) -> PoiSet {
        let open: std::collections::HashSet<&str> = self
            .generations
            .iter()
            .filter(|g| g.start <= t && t < g.end)
            .map(|g| g.poi_id.as_str())
            .collect();
        self.pois.filtered(|p| open.contains(p.poi_id.as_str()))
    }

    /// Best achievable category accuracy.
    pub fn bayes_category_rate(&self) -> f64 {
        self.chain.bayes_rate()
    }

    /// Best achievable next-POI accuracy when only currently open POIs
    /// compete: the category must be right and the user must stay put.
    pub fn bayes_poi_rate(&self) -> f64 {
        self.chain.bayes_rate() * (1.0 - self.config.travel_probability)
    }

    /// The visits in the check-in TSV layout, in time order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut order: Vec<&Visit> = self.visits.iter().collect();
        order.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.user_id.cmp(&b.user_id)));
        let names: BTreeMap<&str, &str> = self
            .category_names
            .iter()
            .enumerate()
            .map(|(i, n)| (self.pois.category_vocabulary()[i].as_str(), n.as_str()))
            .collect();
        for v in order {
            let poi = self.pois.get(&v.poi_id).expect("visited POI exists");
            writeln!(out, "{}", format_checkin(v, poi, names[poi.category_id.as_str()]))?;
        }
        Ok(())
    }
}

fn hex_id(rng: &mut ChaCha8Rng) -> String {
    let bytes: [u8; 12] = rng.random();
    hex::encode(bytes)
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let chain = MarkovChain::cyclic(config.categories, config.p_next)?;
    let horizon = (config.horizon_days * 86_400.0) as i64;
    let end_of_time = i64::MAX / 4;

    // Cluster centres on a square grid around the origin.
    let side = (config.clusters as f64).sqrt().ceil() as usize;
    let km_per_deg_lon = KM_PER_DEG_LAT * ORIGIN.0.to_radians().cos();
    let to_latlon = |north_km: f64, east_km: f64| {
        (ORIGIN.0 + north_km / KM_PER_DEG_LAT, ORIGIN.1 + east_km / km_per_deg_lon)
    };
    let mut slot_xy = Vec::new();
    for c in 0..config.clusters {
        let (cy, cx) = ((c / side) as f64 * config.cluster_spacing_km, (c % side) as f64 * config.cluster_spacing_km);
        for _ in 0..config.categories {
            let r = config.slot_radius_km * rng.random::<f64>().sqrt();
            let a = rng.random::<f64>() * std::f64::consts::TAU;
            slot_xy.push((cy + r * a.sin(), cx + r * a.cos()));
        }
    }
    let slot_count = slot_xy.len();
    let slot = |cluster: usize, category: usize| cluster * config.categories + category;

    let mut generations: Vec<Generation> = Vec::new();
    let mut swap_time = None;
    let mut starts: Vec<Vec<i64>> = vec![vec![i64::MIN / 4]; slot_count];
    match config.churn {
        Churn::None => {}
        Churn::Swap { at_fraction, fraction } => {
            let t = BASE_TIME + (at_fraction * horizon as f64) as i64;
            swap_time = Some(t);
            let n = (fraction * slot_count as f64).round() as usize;
            let mut chosen = sample(&mut rng, slot_count, n).into_vec();
            chosen.sort_unstable();
            for s in chosen {
                starts[s].push(t);
            }
        }
        Churn::Poisson { replacements_per_slot } => {
            if replacements_per_slot > 0.0 {
                let gap = Exp::new(replacements_per_slot / horizon as f64).expect("positive rate");
                for s in starts.iter_mut() {
                    let mut t = BASE_TIME as f64;
                    loop {
                        t += gap.sample(&mut rng);
                        if t >= (BASE_TIME + horizon) as f64 {
                            break;
                        }
                        s.push(t as i64);
                    }
                }
            }
        }
    }
    let mut records = Vec::new();
    let category_ids: Vec<String> = (0..config.categories).map(|k| format!("cat{k:02}")).collect();
    for (s, times) in starts.iter().enumerate() {
        for (i, &start) in times.iter().enumerate() {
            let end = times.get(i + 1).copied().unwrap_or(end_of_time);
            let poi_id = hex_id(&mut rng);
            let (lat, lon) = to_latlon(slot_xy[s].0, slot_xy[s].1);
            records.push(PoiRecord {
                poi_id: poi_id.clone(),
                lat,
                lon,
                category_id: category_ids[s % config.categories].clone(),
            });
            generations.push(Generation { poi_id, slot: s, start, end });
        }
    }
    let pois = PoiSet::from_records(records, None);
    let by_slot: Vec<Vec<usize>> = {
        let mut v = vec![Vec::new(); slot_count];
        for (i, g) in generations.iter().enumerate() {
            v[g.slot].push(i);
        }
        v
    };
    let open_at = |s: usize, t: i64| -> &Generation {
        let i = by_slot[s]
            .iter()
            .rev()
            .find(|&&i| generations[i].start <= t)
            .expect("first generation opens before time begins");
        &generations[*i]
    };

    // Nearest slot of each category from each slot.
    let nearest: Vec<Vec<usize>> = (0..slot_count)
        .map(|from| {
            (0..config.categories)
                .map(|k| {
                    (0..config.clusters)
                        .map(|c| slot(c, k))
                        .min_by(|&a, &b| {
                            let d = |s: usize| {
                                (slot_xy[s].0 - slot_xy[from].0).powi(2) + (slot_xy[s].1 - slot_xy[from].1).powi(2)
                            };
                            d(a).total_cmp(&d(b)).then(a.cmp(&b))
                        })
                        .expect("at least one cluster")
                })
                .collect()
        })
        .collect();

    let rows: Vec<WeightedIndex<f64>> = chain
        .transition
        .iter()
        .map(|row| WeightedIndex::new(row).expect("valid row"))
        .collect();
    let mean_gap = horizon as f64 / config.visits_per_user as f64;
    let gap = Exp::new(1.0 / mean_gap).expect("positive rate");
    let mut visits = Vec::with_capacity(config.users * config.visits_per_user);
    for u in 0..config.users {
        let user_id = format!("{}", 1000 + u);
        let home = rng.random_range(0..config.clusters);
        let mut category = rng.random_range(0..config.categories);
        let mut current = slot(home, category);
        let mut t = BASE_TIME as f64 + rng.random::<f64>() * mean_gap;
        for _ in 0..config.visits_per_user {
            let ts = t as i64;
            visits.push(Visit {
                user_id: user_id.clone(),
                timestamp: ts,
                poi_id: open_at(current, ts).poi_id.clone(),
                tz_offset_minutes: -240,
            });
            category = rows[category].sample(&mut rng);
            current = if config.travel_probability > 0.0 && rng.random::<f64>() < config.travel_probability {
                let other = (home + rng.random_range(1..config.clusters)) % config.clusters;
                slot(other, category)
            } else {
                nearest[slot(home, category)][category]
            };
            t += gap.sample(&mut rng).max(60.0);
        }
    }
    let category_names = (0..config.categories).map(|k| format!("Category {k}")).collect();
    Ok(SyntheticDataset {
        config: config.clone(),
        chain,
        pois,
        generations,
        visits,
        category_names,
        swap_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_checkins, IngestFormat};

    #[test]
    fn cyclic_chain_bayes_rate() {
        let chain = MarkovChain::cyclic(6, 0.9).unwrap();
        for row in &chain.transition {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((row.iter().filter(|&&p| (p - 0.02).abs() < 1e-12).count()) == 5);
        }
        let pi = chain.stationary();
        for p in pi {
            assert!((p - 1.0 / 6.0).abs() < 1e-12);
        }
        assert!((chain.bayes_rate() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn swap_replaces_half_the_slots() {
        let config = SyntheticConfig {
            users: 10,
            visits_per_user: 20,
            ..SyntheticConfig::swap()
        };
        let d = generate(&config).unwrap();
        let t = d.swap_time.unwrap();
        assert_eq!(d.active_at(t - 1).len(), 48);
        assert_eq!(d.active_at(t).len(), 48);
        assert_eq!(d.pois.len(), 48 + 24);
        let before: std::collections::HashSet<String> = d.active_at(t - 1).iter().map(|p| p.poi_id.clone()).collect();
        let after = d.active_at(t);
        assert_eq!(after.iter().filter(|p| !before.contains(&p.poi_id)).count(), 24);
        for g in &d.generations {
            assert_eq!(d.pois.get(&g.poi_id).unwrap().category_id, format!("cat{:02}", g.slot % 6));
        }
    }

    #[test]
    fn visits_follow_open_generations() {
        let d = generate(&SyntheticConfig {
            users: 20,
            visits_per_user: 30,
            ..SyntheticConfig::churn()
        })
        .unwrap();
        let by_id: BTreeMap<&str, &Generation> = d.generations.iter().map(|g| (g.poi_id.as_str(), g)).collect();
        for v in &d.visits {
            let g = by_id[v.poi_id.as_str()];
            assert!(g.start <= v.timestamp && v.timestamp < g.end);
        }
    }

    #[test]
    fn tsv_round_trips_through_the_reader() {
        let d = generate(&SyntheticConfig {
            users: 5,
            visits_per_user: 10,
            ..SyntheticConfig::swap()
        })
        .unwrap();
        let mut buf = Vec::new();
        d.write_tsv(&mut buf).unwrap();
        let ingested = parse_checkins(&buf[..], &IngestFormat::default()).unwrap();
        assert_eq!(ingested.stats.malformed, 0);
        assert_eq!(ingested.stats.visits, 50);
        let histories = ingested.histories;
        assert_eq!(histories, d.histories());
    }

    #[test]
    fn generation_is_deterministic() {
        let c = SyntheticConfig {
            users: 5,
            visits_per_user: 10,
            ..SyntheticConfig::churn()
        };
        let (a, b) = (generate(&c).unwrap(), generate(&c).unwrap());
        assert_eq!(a.visits, b.visits);
        assert_eq!(a.generations, b.generations);
    }
}
