use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Significance {
    pub significant: bool,
    /// Fraction of resamples in which system A beats system B, ties counted half.
    pub p_greater: f64,
}

/// Paired bootstrap over documents.
///
/// Each resample draws document indices with replacement and compares the
/// summed per-document difference `a - b` against zero. The difference is
/// significant when A wins in at least `level` of the resamples or in at
/// most `1 - level` of them.
pub fn significance_test(
    scores_a: &[f64],
    scores_b: &[f64],
    level: f64,
    resamples: usize,
    seed: u64,
) -> Result<Significance> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::Dimension {
            context: "paired score lists",
            expected: scores_a.len(),
            actual: scores_b.len(),
        });
    }
    if scores_a.len() < 2 {
        return Err(Error::invalid("significance test needs at least 2 documents"));
    }
    if !(level > 0.5 && level < 1.0) {
        return Err(Error::invalid(format!("significance level {level} outside (0.5, 1)")));
    }
    if resamples == 0 {
        return Err(Error::invalid("significance test needs at least one resample"));
    }
    let diffs: Vec<f64> = scores_a.iter().zip(scores_b).map(|(a, b)| a - b).collect();
    let n = diffs.len();
    let mut rng = derive_rng(seed, "bootstrap");
    let mut wins = 0.0;
    for _ in 0..resamples {
        let total: f64 = (0..n).map(|_| diffs[rng.gen_range(0..n)]).sum();
        if total > 0.0 {
            wins += 1.0;
        } else if total == 0.0 {
            wins += 0.5;
        }
    }
    let p_greater = wins / resamples as f64;
    Ok(Significance {
        significant: p_greater >= level || p_greater <= 1.0 - level,
        p_greater,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_lists_are_not_significant() {
        let a = [0.2, 0.5, 0.1, 0.9, 0.4];
        let r = significance_test(&a, &a, 0.95, 1000, 1).unwrap();
        assert!(!r.significant);
        assert_eq!(r.p_greater, 0.5);
    }

    #[test]
    fn uniform_dominance() {
        let b = [0.2, 0.5, 0.1, 0.9, 0.4];
        let a: Vec<f64> = b.iter().map(|x| x + 10.0).collect();
        let r = significance_test(&a, &b, 0.95, 1000, 1).unwrap();
        assert!(r.significant);
        assert_eq!(r.p_greater, 1.0);
        let r = significance_test(&b, &a, 0.95, 1000, 1).unwrap();
        assert!(r.significant && r.p_greater == 0.0);
    }

    #[test]
    fn independent_resampler_agrees() {
        let a: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let b: Vec<f64> = (0..30).map(|i| ((i * 5) % 13) as f64 / 12.0).collect();
        let r = significance_test(&a, &b, 0.95, 500, 42).unwrap();
        // Resample means directly rather than summed differences.
        let mut rng = derive_rng(42, "bootstrap");
        let mut wins = 0.0;
        for _ in 0..500 {
            let idx: Vec<usize> = (0..30).map(|_| rng.gen_range(0..30)).collect();
            let ma: f64 = idx.iter().map(|&i| a[i]).sum::<f64>() / 30.0;
            let mb: f64 = idx.iter().map(|&i| b[i]).sum::<f64>() / 30.0;
            wins += if ma > mb { 1.0 } else if ma == mb { 0.5 } else { 0.0 };
        }
        assert_eq!(r.p_greater, wins / 500.0);
    }

    #[test]
    fn affine_invariance_and_errors() {
        let a = [1.0, 3.0, 2.0, 5.0, 4.0, 2.0];
        let b = [2.0, 2.0, 2.0, 4.0, 1.0, 3.0];
        let r = significance_test(&a, &b, 0.95, 800, 9).unwrap();
        let t = |x: &[f64]| x.iter().map(|v| 4.0 * v + 3.0).collect::<Vec<_>>();
        assert_eq!(significance_test(&t(&a), &t(&b), 0.95, 800, 9).unwrap(), r);
        assert!(significance_test(&a, &b[..5], 0.95, 10, 1).is_err());
        assert!(significance_test(&a[..1], &b[..1], 0.95, 10, 1).is_err());
    }
}
