use crate::error::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Empty("softmax logits"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    Ok(out)
}

/// `ln Σ exp(logits)` computed with max subtraction.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// Mean negative log-likelihood over the unmasked positions of a sequence.
///
/// `mask[t] == true` marks a real (non-padding) position. A sequence with no
/// unmasked position has no defined mean and is rejected.
pub fn cross_entropy_seq(logits: &[Vec<f64>], targets: &[usize], mask: &[bool]) -> Result<f64> {
    if logits.len() != targets.len() || logits.len() != mask.len() {
        return Err(Error::Dimension {
            context: "cross_entropy_seq lengths",
            expected: logits.len(),
            actual: targets.len().min(mask.len()),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ((row, &target), &keep) in logits.iter().zip(targets).zip(mask) {
        if !keep {
            continue;
        }
        if target >= row.len() {
            return Err(Error::IdOutOfRange {
                id: target,
                size: row.len(),
            });
        }
        total += log_sum_exp(row) - row[target];
        count += 1;
    }
    if count == 0 {
        return Err(Error::Empty("cross_entropy_seq: every position is masked"));
    }
    Ok(total / count as f64)
}
