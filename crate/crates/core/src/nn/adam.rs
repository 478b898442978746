use serde::{Deserialize, Serialize};

use super::{Gradients, Mat, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

/// Adaptive-moment optimizer state, one moment pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Mat>,
    pub second: Vec<Mat>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros: Vec<Mat> = params
            .ids()
            .map(|id| Mat::zeros(params.get(id).raw_dim()))
            .collect();
        Adam {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn update(&mut self, params: &mut ParamStore, grads: &Gradients) {
        let c = self.config;
        let scale = match c.clip_norm {
            Some(max) => {
                let n = grads.norm();
                if n > max {
                    max / n
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.step += 1;
        let bias1 = 1.0 - c.beta1.powi(self.step as i32);
        let bias2 = 1.0 - c.beta2.powi(self.step as i32);
        for id in params.ids().collect::<Vec<_>>() {
            if !grads.touches(id) {
                // Zero gradient still decays the moments.
                let m = &mut self.first[id.index()];
                let v = &mut self.second[id.index()];
                if m.iter().all(|&x| x == 0.0) {
                    continue;
                }
                let p = params.get_mut(id);
                ndarray::Zip::from(p).and(m).and(v).for_each(|p, m, v| {
                    *m *= c.beta1;
                    *v *= c.beta2;
                    *p -= c.learning_rate * (*m / bias1) / ((*v / bias2).sqrt() + c.epsilon);
                });
                continue;
            }
            let g = grads.to_dense(id, params.get(id));
            let m = &mut self.first[id.index()];
            let v = &mut self.second[id.index()];
            let p = params.get_mut(id);
            ndarray::Zip::from(p).and(m).and(v).and(&g).for_each(|p, m, v, &g| {
                let g = g * scale;
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                *p -= c.learning_rate * (*m / bias1) / ((*v / bias2).sqrt() + c.epsilon);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = ParamStore::new();
        let id = params.add("w", array![[1.0, -2.0]]);
        let mut adam = Adam::new(AdamConfig::default(), &params);
        let mut g = Gradients::new();
        g.add_dense(id, &array![[0.5, -0.25]]);
        adam.update(&mut params, &g);
        let w = params.get(id);
        assert!((w[[0, 0]] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((w[[0, 1]] - (-2.0 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut params = ParamStore::new();
        let id = params.add("w", array![[3.0]]);
        let config = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(config, &params);
        for _ in 0..2000 {
            let mut g = Gradients::new();
            let w = params.get(id)[[0, 0]];
            g.add_dense(id, &array![[2.0 * (w - 1.0)]]);
            adam.update(&mut params, &g);
        }
        assert!((params.get(id)[[0, 0]] - 1.0).abs() < 1e-3);
    }
}
