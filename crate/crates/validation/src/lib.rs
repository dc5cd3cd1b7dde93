//! Reference oracles and finite-difference helpers for the acceptance suite
//! in `tests/acceptance.rs`.

use ecg_gaf::nn::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f32 = 1e-3;

pub fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> Tensor {
    let len = dims.iter().product();
    Tensor::from_vec(dims, (0..len).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Weighted sum `Σ w_i · y_i` accumulated in f64; turns a tensor-valued
/// function into a scalar whose gradient with respect to `y` is `w`.
pub fn weighted_sum(y: &Tensor, w: &[f32]) -> f64 {
    y.data()
        .iter()
        .zip(w)
        .map(|(a, b)| *a as f64 * *b as f64)
        .sum()
}

/// Central finite differences of `f` at `x`, one coordinate at a time. The
/// divisor is the actual f32 distance between the two probe points.
pub fn numeric_gradient(x: &[f32], step: f32, mut f: impl FnMut(&[f32]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let plus = x[i] + step;
            let minus = x[i] - step;
            probe[i] = plus;
            let fp = f(&probe);
            probe[i] = minus;
            let fm = f(&probe);
            probe[i] = x[i];
            (fp - fm) / (plus as f64 - minus as f64)
        })
        .collect()
}

/// `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)`, or 0 when both are zero.
pub fn relative_error(analytic: &[f32], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nn = 0.0;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let a = a as f64;
        diff += (a - n) * (a - n);
        na += a * a;
        nn += n * n;
    }
    let denom = na.sqrt().max(nn.sqrt());
    if denom == 0.0 {
        0.0
    } else {
        diff.sqrt() / denom
    }
}

/// Independent min-max rescale to [-1, 1] (constant series → zeros).
pub fn oracle_rescale(x: &[f64]) -> Vec<f64> {
    let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return vec![0.0; x.len()];
    }
    x.iter()
        .map(|&v| (2.0 * v - max - min) / (max - min))
        .map(|v| v.clamp(-1.0, 1.0))
        .collect()
}

/// Summation field through the algebraic identity
/// `cos(a + b) = cos a cos b − sin a sin b` with `cos φ = x̃`.
pub fn oracle_gasf_algebraic(xt: &[f64]) -> Vec<f64> {
    let n = xt.len();
    let s: Vec<f64> = xt.iter().map(|v| (1.0 - v * v).max(0.0).sqrt()).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = xt[i] * xt[j] - s[i] * s[j];
        }
    }
    out
}
