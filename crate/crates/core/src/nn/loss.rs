//! Softmax cross-entropy.

use ndarray::Array2;

use crate::error::{input, Result};

/// Summed cross-entropy over rows and its gradient with respect to the
/// logits (of the sum, not the mean).
pub(crate) fn xent_sum(logits: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    if logits.nrows() != labels.len() {
        return input("one label per logits row required");
    }
    let c = logits.ncols();
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= c {
            return input(format!("label {y} out of range for {c} classes"));
        }
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[y];
        for j in 0..c {
            grad[[i, j]] = (row[j] - log_z).exp() - f64::from(u8::from(j == y));
        }
    }
    Ok((total, grad))
}

/// Mean softmax cross-entropy over rows and its analytic gradient.
pub fn loss_xent(logits: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    if labels.is_empty() {
        return input("loss over an empty batch");
    }
    let (sum, grad) = xent_sum(logits, labels)?;
    let n = labels.len() as f64;
    Ok((sum / n, grad / n))
}

/// Index of the largest logit; ties go to the lowest class index.
pub fn argmax_row(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}
