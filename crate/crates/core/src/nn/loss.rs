use super::Tensor;
use crate::error::{Error, Result};

/// Row-wise softmax computed in `f64` with max subtraction.
pub fn softmax_rows(logits: &[f32], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(classes) {
        let max = row.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
        let start = out.len();
        let mut sum = 0.0;
        for &v in row {
            let e = (v as f64 - max).exp();
            sum += e;
            out.push(e);
        }
        for p in &mut out[start..] {
            *p /= sum;
        }
    }
    out
}

/// Mean softmax cross-entropy over a `[n, k]` batch and its gradient
/// `(softmax - onehot) / n` with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let d = logits.dims();
    if d.len() != 2 || d[0] != labels.len() {
        return Err(Error::shape(
            &[labels.len(), d.last().copied().unwrap_or(0)],
            d,
        ));
    }
    let (n, k) = (d[0], d[1]);
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::LabelRange {
            row: labels.iter().position(|&l| l == bad).unwrap_or(0),
            label: bad,
            num_classes: k,
        });
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(n * k);
    for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
        let max = row.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
        let sum: f64 = row.iter().map(|&v| (v as f64 - max).exp()).sum();
        let log_sum = sum.ln();
        loss -= row[label] as f64 - max - log_sum;
        for (j, &v) in row.iter().enumerate() {
            let p = (v as f64 - max - log_sum).exp();
            let onehot = if j == label { 1.0 } else { 0.0 };
            grad.push(((p - onehot) / n as f64) as f32);
        }
    }
    Ok((loss / n as f64, Tensor::from_vec(d, grad)?))
}
