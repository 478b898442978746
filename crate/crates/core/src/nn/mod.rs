//! Minimal reverse-mode differentiation over dense `f64` matrices, enough to
//! train the visit-sequence encoder and its heads.

mod adam;
mod params;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{Backward, Tape, Var};

pub type Mat = ndarray::Array2<f64>;

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// tanh approximation of GELU and its derivative.
pub(crate) fn gelu(x: f64) -> (f64, f64) {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    const K: f64 = 0.044_715;
    let u = C * (x + K * x * x * x);
    let t = u.tanh();
    let y = 0.5 * x * (1.0 + t);
    let dy = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * K * x * x);
    (y, dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_one_two_three() {
        let p = softmax(&[1.0, 2.0, 3.0]);
        assert!((p[0] - 0.0900).abs() < 1e-4);
        assert!((p[1] - 0.2447).abs() < 1e-4);
        assert!((p[2] - 0.6652).abs() < 1e-4);
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h).0 - gelu(x - h).0) / (2.0 * h);
            assert!((fd - gelu(x).1).abs() < 1e-8);
        }
    }
}
