use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameter matrices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Parameter gradients. Embedding tables accumulate sparse row updates.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    dense: BTreeMap<ParamId, Mat>,
    rows: BTreeMap<ParamId, BTreeMap<usize, Vec<f64>>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add_dense(&mut self, id: ParamId, g: &Mat) {
        match self.dense.get_mut(&id) {
            Some(acc) => *acc += g,
            None => {
                self.dense.insert(id, g.clone());
            }
        }
    }

    pub(crate) fn add_row(&mut self, id: ParamId, row: usize, g: ndarray::ArrayView1<f64>) {
        let slot = self
            .rows
            .entry(id)
            .or_default()
            .entry(row)
            .or_insert_with(|| vec![0.0; g.len()]);
        slot.iter_mut().zip(g.iter()).for_each(|(a, b)| *a += b);
    }

    pub fn merge(&mut self, other: Gradients) {
        for (id, g) in other.dense {
            match self.dense.get_mut(&id) {
                Some(acc) => *acc += &g,
                None => {
                    self.dense.insert(id, g);
                }
            }
        }
        for (id, rows) in other.rows {
            let target = self.rows.entry(id).or_default();
            for (r, g) in rows {
                match target.get_mut(&r) {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    None => {
                        target.insert(r, g);
                    }
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.dense.values_mut().for_each(|g| *g *= s);
        self.rows
            .values_mut()
            .flat_map(|m| m.values_mut())
            .for_each(|g| g.iter_mut().for_each(|x| *x *= s));
    }

    pub fn norm(&self) -> f64 {
        let dense: f64 = self.dense.values().flat_map(|g| g.iter()).map(|x| x * x).sum();
        let rows: f64 = self
            .rows
            .values()
            .flat_map(|m| m.values())
            .flat_map(|g| g.iter())
            .map(|x| x * x)
            .sum();
        (dense + rows).sqrt()
    }

    /// Dense gradient for `id`, shaped like `like`. Zero when untouched.
    pub fn to_dense(&self, id: ParamId, like: &Mat) -> Mat {
        let mut out = match self.dense.get(&id) {
            Some(g) => g.clone(),
            None => Array2::zeros(like.raw_dim()),
        };
        if let Some(rows) = self.rows.get(&id) {
            for (&r, g) in rows {
                out.index_axis_mut(Axis(0), r)
                    .iter_mut()
                    .zip(g)
                    .for_each(|(a, b)| *a += b);
            }
        }
        out
    }

    pub fn touches(&self, id: ParamId) -> bool {
        self.dense.contains_key(&id) || self.rows.contains_key(&id)
    }
}
