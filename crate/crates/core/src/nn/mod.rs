//! Minimal channels-last tensor engine.
//!
//! Each layer exposes a forward pass and a hand-written backward pass. The
//! backward pass takes whatever the forward pass saved (the input, or the
//! max-pool argmax record) and accumulates parameter gradients into the
//! layer's tensors. [`layer::Layer`] ties the kinds together and
//! [`checkpoint`] serializes a layer stack.

pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod layer;
pub mod loss;
pub mod optim;
pub mod pool;
pub mod relu;
pub mod tensor;

pub use conv::Conv2d;
pub use dense::Dense;
pub use layer::{Layer, Saved};
pub use loss::softmax_cross_entropy;
pub use optim::{Optimizer, OptimizerKind};
pub use pool::{MaxPool2d, PoolRecord};
pub use tensor::Tensor;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dot product with `f64` accumulation over eight fixed lanes.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] as f64 * y[k] as f64;
        }
    }
    let mut tail = 0f64;
    for (x, y) in ra.iter().zip(rb) {
        tail += *x as f64 * *y as f64;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `acc += alpha * x` into an `f64` buffer.
#[inline]
pub(crate) fn axpy(acc: &mut [f64], alpha: f64, x: &[f32]) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += alpha * v as f64;
    }
}

/// Glorot-uniform fill: U(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
pub(crate) fn glorot_uniform(t: &mut Tensor, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
    for v in t.data_mut() {
        *v = rng.random_range(-limit..limit);
    }
}

pub(crate) fn debug_check_finite(t: &Tensor, what: &str) {
    debug_assert!(t.all_finite(), "{what} produced a non-finite value");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f32> = (0..29).map(|i| i as f32 * 0.5 - 3.0).collect();
        let b: Vec<f32> = (0..29).map(|i| (i % 7) as f32 - 2.0).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| *x as f64 * *y as f64).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }
}
