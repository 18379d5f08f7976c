use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RougeScore {
    pub recall: f64,
    pub precision: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *m.entry(g).or_insert(0) += 1;
        }
    }
    m
}

/// Clipped n-gram overlap over reference (recall) and candidate (precision) counts.
pub fn rouge_n<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> Result<RougeScore> {
    if n == 0 {
        return Err(Error::invalid("ROUGE-N needs n >= 1"));
    }
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap: usize = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    Ok(RougeScore {
        recall: ratio(overlap, refs.values().sum()),
        precision: ratio(overlap, cand.values().sum()),
    })
}

pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> RougeScore {
    let l = lcs_len(candidate, reference);
    RougeScore {
        recall: ratio(l, reference.len()),
        precision: ratio(l, candidate.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn worked_examples() {
        let r = rouge_n(&w("a b c"), &w("a d"), 1).unwrap();
        assert_eq!((r.recall, r.precision), (0.5, 1.0 / 3.0));
        let r = rouge_l(&w("a b c d"), &w("a c d"));
        assert_eq!((r.recall, r.precision), (1.0, 0.75));
        let r = rouge_n(&w("a a a"), &w("a b"), 1).unwrap();
        assert_eq!((r.recall, r.precision), (0.5, 1.0 / 3.0));
        assert_eq!(rouge_n(&w(""), &w("a"), 1).unwrap(), RougeScore::default());
        assert_eq!(rouge_l::<&str>(&[], &[]), RougeScore::default());
        assert!(rouge_n(&w("a"), &w("a"), 0).is_err());
    }

    /// Exponential-time LCS used as an independent oracle.
    fn lcs_brute(a: &[u8], b: &[u8]) -> usize {
        match (a.split_first(), b.split_first()) {
            (Some((x, ra)), Some((y, rb))) => {
                if x == y {
                    1 + lcs_brute(ra, rb)
                } else {
                    lcs_brute(ra, b).max(lcs_brute(a, rb))
                }
            }
            _ => 0,
        }
    }

    proptest! {
        #[test]
        fn lcs_matches_recursion(a in prop::collection::vec(0u8..4, 0..9), b in prop::collection::vec(0u8..4, 0..9)) {
            prop_assert_eq!(lcs_len(&a, &b), lcs_brute(&a, &b));
        }

        #[test]
        fn bounds_and_symmetry(a in prop::collection::vec(0u8..5, 0..12), b in prop::collection::vec(0u8..5, 0..12), n in 1usize..3) {
            let r = rouge_n(&a, &b, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.recall) && (0.0..=1.0).contains(&r.precision));
            let l = rouge_l(&a, &b);
            prop_assert!((0.0..=1.0).contains(&l.recall) && (0.0..=1.0).contains(&l.precision));
            prop_assert_eq!(l.recall, rouge_l(&b, &a).precision);
            prop_assert_eq!(r.recall, rouge_n(&b, &a, n).unwrap().precision);
            if !a.is_empty() {
                prop_assert_eq!(rouge_n(&a, &a, 1).unwrap(), RougeScore { recall: 1.0, precision: 1.0 });
            }
        }
    }
}
