use rayon::prelude::*;

use super::ngram::{ce_diff_score, NGramLm};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

pub const DEFAULT_GRID: [f64; 8] = [
    1.0 / 64.0,
    1.0 / 32.0,
    1.0 / 16.0,
    1.0 / 8.0,
    1.0 / 4.0,
    1.0 / 2.0,
    3.0 / 4.0,
    1.0,
];

/// Relative perplexity difference below which two cutoffs count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NGramConfig {
    pub order: usize,
    pub discount: f64,
}

impl Default for NGramConfig {
    fn default() -> Self {
        NGramConfig {
            order: 3,
            discount: 0.7,
        }
    }
}

/// A candidate sentence located in the document collection.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSentence {
    pub doc: usize,
    pub sentence: usize,
    pub ids: Vec<usize>,
    /// `H_in - H_out` in nats per word.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Membership flag per candidate, aligned with the scored list.
    pub retained: Vec<bool>,
    pub fraction: f64,
    /// `(fraction, validation perplexity)` for every grid point.
    pub per_cutoff: Vec<(f64, f64)>,
}

impl SelectionResult {
    pub fn retained_count(&self) -> usize {
        self.retained.iter().filter(|&&r| r).count()
    }
}

/// Scores every sentence against in-domain and out-of-domain n-gram models.
pub fn score_sentences(
    candidates: Vec<(usize, usize, Vec<usize>)>,
    lm_in: &NGramLm,
    lm_out: &NGramLm,
) -> Result<Vec<ScoredSentence>> {
    candidates
        .into_par_iter()
        .map(|(doc, sentence, ids)| {
            let score = ce_diff_score(lm_in, lm_out, &ids)?;
            Ok(ScoredSentence {
                doc,
                sentence,
                ids,
                score,
            })
        })
        .collect()
}

/// Candidate indices ordered by ascending score, ties by position.
pub fn ranking(scored: &[ScoredSentence]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].score.total_cmp(&scored[b].score).then(a.cmp(&b)));
    order
}

/// How many of `n` candidates a fraction keeps (at least one).
pub fn retained_len(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1, n)
}

/// Index of the best grid point: lowest perplexity, ties to the larger fraction.
pub fn pick_cutoff(per_cutoff: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, &(f, ppl)) in per_cutoff.iter().enumerate().skip(1) {
        let (bf, bppl) = per_cutoff[best];
        let tied = (ppl - bppl).abs() <= TIE_TOLERANCE * bppl.abs();
        if (!tied && ppl < bppl) || (tied && f > bf) {
            best = i;
        }
    }
    best
}

/// Trains an n-gram model on each prefix of the ranking given by the grid
/// and keeps the one with the lowest validation perplexity.
pub fn select_cutoff(
    scored: &[ScoredSentence],
    validation: &[Vec<usize>],
    grid: &[f64],
    vocab: &Vocabulary,
    ngram: NGramConfig,
) -> Result<SelectionResult> {
    if scored.is_empty() {
        return Err(Error::Empty("selection candidates"));
    }
    if grid.is_empty() {
        return Err(Error::Empty("cutoff grid"));
    }
    if let Some(f) = grid.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::invalid(format!("cutoff fraction {f} outside (0, 1]")));
    }
    let order = ranking(scored);
    let per_cutoff: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&f| {
            let keep = retained_len(f, scored.len());
            let corpus: Vec<&[usize]> = order[..keep]
                .iter()
                .map(|&i| scored[i].ids.as_slice())
                .collect();
            let lm = NGramLm::train(&corpus, ngram.order, ngram.discount, vocab)?;
            Ok((f, lm.perplexity(validation)?))
        })
        .collect::<Result<_>>()?;
    let best = pick_cutoff(&per_cutoff);
    let fraction = per_cutoff[best].0;
    let mut retained = vec![false; scored.len()];
    for &i in &order[..retained_len(fraction, scored.len())] {
        retained[i] = true;
    }
    Ok(SelectionResult {
        retained,
        fraction,
        per_cutoff,
    })
}

/// Retained sentence indices per document, ascending.
pub fn filter_sentences(
    num_docs: usize,
    scored: &[ScoredSentence],
    selection: &SelectionResult,
) -> Result<Vec<Vec<usize>>> {
    if scored.len() != selection.retained.len() {
        return Err(Error::Dimension {
            context: "selection inventory",
            expected: scored.len(),
            actual: selection.retained.len(),
        });
    }
    let mut out = vec![Vec::new(); num_docs];
    for (s, &keep) in scored.iter().zip(&selection.retained) {
        if s.doc >= num_docs {
            return Err(Error::invalid(format!("sentence refers to document {}", s.doc)));
        }
        if keep {
            out[s.doc].push(s.sentence);
        }
    }
    for v in &mut out {
        v.sort_unstable();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(n: usize) -> Vocabulary {
        let toks: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        Vocabulary::build(std::iter::once(toks.as_slice()), n, 1).unwrap()
    }

    fn scored(scores: &[f64]) -> Vec<ScoredSentence> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &score)| ScoredSentence {
                doc: i / 2,
                sentence: i % 2,
                ids: vec![4 + i % 3, 5],
                score,
            })
            .collect()
    }

    #[test]
    fn single_fraction_grid() {
        let v = vocab(4);
        let s = scored(&[0.3, -0.1, 0.2, 0.0]);
        let r = select_cutoff(&s, &[vec![4, 5]], &[0.5], &v, NGramConfig::default()).unwrap();
        assert_eq!(r.fraction, 0.5);
        assert_eq!(r.retained, vec![false, true, false, true]);
    }

    #[test]
    fn identical_sentences_pick_largest() {
        let v = vocab(4);
        let s: Vec<ScoredSentence> = (0..16)
            .map(|i| ScoredSentence {
                doc: i,
                sentence: 0,
                ids: vec![4, 5, 6],
                score: 0.0,
            })
            .collect();
        let r = select_cutoff(&s, &[vec![4, 5, 6]], &DEFAULT_GRID, &v, NGramConfig::default())
            .unwrap();
        assert_eq!(r.fraction, 1.0);
        assert_eq!(r.retained_count(), 16);
    }

    #[test]
    fn tie_rule_prefers_larger_fraction() {
        assert_eq!(pick_cutoff(&[(0.25, 10.0), (0.5, 10.0), (1.0, 10.0)]), 2);
        assert_eq!(pick_cutoff(&[(0.25, 9.0), (0.5, 10.0), (1.0, 10.0)]), 0);
        assert_eq!(pick_cutoff(&[(1.0, 10.0), (0.5, 10.0)]), 0);
    }

    #[test]
    fn bad_inputs() {
        let v = vocab(4);
        let cfg = NGramConfig::default();
        assert!(select_cutoff(&[], &[vec![4]], &[1.0], &v, cfg).is_err());
        let s = scored(&[0.1]);
        assert!(select_cutoff(&s, &[vec![4]], &[], &v, cfg).is_err());
        assert!(select_cutoff(&s, &[vec![4]], &[0.0], &v, cfg).is_err());
        assert!(select_cutoff(&s, &[vec![4]], &[1.5], &v, cfg).is_err());
    }

    #[test]
    fn filtering_per_document() {
        let s = scored(&[0.3, -0.1, 0.2, 0.0, 0.5, 0.6]);
        let sel = SelectionResult {
            retained: vec![false, true, false, true, false, false],
            fraction: 1.0 / 3.0,
            per_cutoff: vec![],
        };
        let per_doc = filter_sentences(3, &s, &sel).unwrap();
        assert_eq!(per_doc, vec![vec![1], vec![1], vec![]]);
        let all = SelectionResult {
            retained: vec![true; 6],
            fraction: 1.0,
            per_cutoff: vec![],
        };
        assert_eq!(filter_sentences(3, &s, &all).unwrap(), vec![vec![0, 1]; 3]);
        // Membership agrees with recomputation from scores and the threshold.
        let order = ranking(&s);
        let keep = retained_len(1.0 / 3.0, s.len());
        let threshold = s[order[keep - 1]].score;
        for (x, &r) in s.iter().zip(&sel.retained) {
            assert_eq!(r, x.score <= threshold);
        }
    }

    #[test]
    fn nested_retention() {
        let s = scored(&[0.3, -0.1, 0.2, 0.0, 0.5, 0.6, -0.4, 0.05]);
        let order = ranking(&s);
        let mut prev: Vec<usize> = Vec::new();
        for f in DEFAULT_GRID {
            let cur: Vec<usize> = order[..retained_len(f, s.len())].to_vec();
            assert!(prev.iter().all(|i| cur.contains(i)));
            prev = cur;
        }
    }
}
