use super::{expect_shape, Scalar, Tensor};
use crate::error::{invalid, Result};

/// Probabilities are floored here before the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let c = logits.row_len();
    let mut out = Vec::with_capacity(logits.len());
    for b in 0..logits.batch() {
        let row = logits.row(b);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        let mut sum = T::zero();
        for &v in row {
            let e = (v - max).exp();
            sum += e;
            out.push(e);
        }
        for v in &mut out[start..start + c] {
            *v = *v / sum;
        }
    }
    Tensor::new(logits.shape().to_vec(), out).expect("same shape")
}

/// One-hot `(B, classes)` matrix.
pub fn one_hot<T: Scalar>(labels: &[usize], classes: usize) -> Result<Tensor<T>> {
    let mut data = vec![T::zero(); labels.len() * classes];
    for (b, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(invalid(format!("label {y} out of range for {classes} classes")));
        }
        data[b * classes + y] = T::one();
    }
    Tensor::new(vec![labels.len(), classes], data)
}

/// Mean over the batch of `-sum_m y_m log p_m`, `p = softmax(logits)`.
///
/// Returns the loss and its gradient w.r.t. the logits, `(p - y) / B`.
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, targets: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    expect_shape("cross_entropy", logits.shape(), targets.shape())?;
    if logits.shape().len() != 2 || logits.batch() == 0 {
        return Err(invalid("cross_entropy expects a non-empty (B, C) batch"));
    }
    let (b, c) = (logits.batch(), logits.row_len());
    for r in 0..b {
        let row = targets.row(r);
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || ones + zeros != c {
            return Err(invalid(format!("target row {r} is not one-hot")));
        }
    }
    let log_floor = T::of_f64(PROB_FLOOR.ln());
    let inv_b = T::one() / T::of_f64(b as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for r in 0..b {
        let row = logits.row(r);
        let y = targets.row(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        for (&z, &t) in row.iter().zip(y) {
            let logp = z - lse;
            if t == T::one() {
                loss -= if logp < log_floor { log_floor } else { logp };
            }
            grad.push((logp.exp() - t) * inv_b);
        }
    }
    Ok((loss * inv_b, Tensor::new(logits.shape().to_vec(), grad)?))
}

/// [`cross_entropy`] with integer class targets.
pub fn cross_entropy_labels<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    cross_entropy(logits, &one_hot(labels, logits.row_len())?)
}
