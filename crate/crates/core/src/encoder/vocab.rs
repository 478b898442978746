use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{PoiSet, UserHistory};

/// Index spaces for the embedding tables. Real entries occupy rows
/// `0..len`; row `len` is UNK and row `len + 1` is PAD.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabFile", into = "VocabFile")]
pub struct Vocabularies {
    pois: Vec<String>,
    categories: Vec<String>,
    poi_index: HashMap<String, usize>,
    category_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    pois: Vec<String>,
    categories: Vec<String>,
}

impl From<VocabFile> for Vocabularies {
    fn from(f: VocabFile) -> Self {
        Vocabularies::new(f.pois, f.categories)
    }
}

impl From<Vocabularies> for VocabFile {
    fn from(v: Vocabularies) -> Self {
        VocabFile {
            pois: v.pois,
            categories: v.categories,
        }
    }
}

pub const HOURS_PER_WEEK: usize = 168;
pub const TIME_PAD: usize = HOURS_PER_WEEK;

impl Vocabularies {
    pub fn new(pois: Vec<String>, categories: Vec<String>) -> Self {
        let poi_index = pois.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let category_index = categories
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Vocabularies {
            pois,
            categories,
            poi_index,
            category_index,
        }
    }

    /// POIs visited in `train` (sorted by id) and the full category list of
    /// `pois`.
    pub fn from_training(train: &[UserHistory], pois: &PoiSet) -> Self {
        let seen: BTreeSet<&str> = train
            .iter()
            .flat_map(|h| h.visits.iter().map(|v| v.poi_id.as_str()))
            .collect();
        Vocabularies::new(
            seen.into_iter().map(str::to_string).collect(),
            pois.category_vocabulary().to_vec(),
        )
    }

    pub fn pois(&self) -> &[String] {
        &self.pois
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn poi_count(&self) -> usize {
        self.pois.len()
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn poi(&self, id: &str) -> Option<usize> {
        self.poi_index.get(id).copied()
    }

    pub fn category(&self, id: &str) -> Option<usize> {
        self.category_index.get(id).copied()
    }

    pub fn poi_unk(&self) -> usize {
        self.pois.len()
    }

    pub fn poi_pad(&self) -> usize {
        self.pois.len() + 1
    }

    pub fn category_unk(&self) -> usize {
        self.categories.len()
    }

    pub fn category_pad(&self) -> usize {
        self.categories.len() + 1
    }
}
