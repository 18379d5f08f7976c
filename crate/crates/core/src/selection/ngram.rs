//! Interpolated absolute-discounting n-gram language model.
//!
//! `P(w | h) = max(c(h,w) - D, 0) / c(h) + D * N1+(h·) / c(h) * P(w | h')`
//! where `h'` drops the oldest context word, bottoming out in a uniform
//! distribution over the event vocabulary. Contexts never seen fall through
//! to the shorter context. Sentence starts are padded with BOS.

use std::collections::HashMap;

use crate::corpus::{Vocabulary, BOS, EOS, PAD, UNK};
use crate::error::{Error, Result};

/// Anything that assigns conditional log-probabilities to words.
pub trait ConditionalLm {
    /// `ln P(word | history)`; `history` holds every preceding word of the
    /// sentence (without BOS padding).
    fn log_prob(&self, history: &[usize], word: usize) -> f64;
}

#[derive(Debug, Clone, Default)]
struct ContextStats {
    total: u64,
    followers: HashMap<usize, u64>,
}

#[derive(Debug, Clone)]
pub struct NGramLm {
    order: usize,
    discount: f64,
    vocab_size: usize,
    event_count: usize,
    /// `tables[k]` holds contexts of length `k`.
    tables: Vec<HashMap<Vec<usize>, ContextStats>>,
}

/// Maps a vocabulary id to a valid n-gram event (UNK or a regular token).
pub fn event_id(id: usize, vocab_size: usize) -> usize {
    if id == PAD || id == BOS || id == EOS || id >= vocab_size {
        UNK
    } else {
        id
    }
}

impl NGramLm {
    pub fn train<S: AsRef<[usize]>>(
        sentences: &[S],
        order: usize,
        discount: f64,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("n-gram order must be at least 1"));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::invalid(format!("discount {discount} must lie in (0, 1)")));
        }
        let vocab_size = vocab.len();
        let mut tables: Vec<HashMap<Vec<usize>, ContextStats>> = vec![HashMap::new(); order];
        let mut words = 0usize;
        for sentence in sentences {
            let ids: Vec<usize> = sentence
                .as_ref()
                .iter()
                .map(|&i| event_id(i, vocab_size))
                .collect();
            let mut padded = vec![BOS; order - 1];
            padded.extend_from_slice(&ids);
            for i in 0..ids.len() {
                let pos = i + order - 1;
                let word = padded[pos];
                for (k, table) in tables.iter_mut().enumerate() {
                    let ctx = padded[pos - k..pos].to_vec();
                    let stats = table.entry(ctx).or_default();
                    stats.total += 1;
                    *stats.followers.entry(word).or_insert(0) += 1;
                }
            }
            words += ids.len();
        }
        if words == 0 {
            return Err(Error::Empty("n-gram training corpus"));
        }
        Ok(NGramLm {
            order,
            discount,
            vocab_size,
            event_count: vocab_size - 3,
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Ids that carry probability mass: UNK and every regular token.
    pub fn events(&self) -> impl Iterator<Item = usize> {
        std::iter::once(UNK).chain(4..self.vocab_size)
    }

    /// Conditional probability given an already padded context of exactly
    /// `order - 1` ids.
    pub fn prob_in_context(&self, context: &[usize], word: usize) -> f64 {
        let word = event_id(word, self.vocab_size);
        let mut p = 1.0 / self.event_count as f64;
        for (k, table) in self.tables.iter().enumerate() {
            let ctx = &context[context.len() - k..];
            if let Some(stats) = table.get(ctx) {
                let c = stats.total as f64;
                let seen = stats.followers.get(&word).copied().unwrap_or(0) as f64;
                let types = stats.followers.len() as f64;
                p = (seen - self.discount).max(0.0) / c + self.discount * types / c * p;
            }
        }
        p
    }

    pub fn padded_context(&self, history: &[usize]) -> Vec<usize> {
        let need = self.order - 1;
        let mut ctx = vec![BOS; need.saturating_sub(history.len())];
        let tail = &history[history.len().saturating_sub(need)..];
        ctx.extend(tail.iter().map(|&i| event_id(i, self.vocab_size)));
        ctx
    }

    /// Observed contexts of full length, for normalization checks.
    pub fn contexts(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.tables[self.order - 1].keys()
    }

    /// Per-word perplexity over a set of sentences.
    pub fn perplexity<S: AsRef<[usize]>>(&self, sentences: &[S]) -> Result<f64> {
        let mut nll = 0.0;
        let mut words = 0usize;
        for s in sentences {
            let s = s.as_ref();
            for i in 0..s.len() {
                nll -= self.log_prob(&s[..i], s[i]);
            }
            words += s.len();
        }
        if words == 0 {
            return Err(Error::Empty("perplexity corpus"));
        }
        Ok((nll / words as f64).exp())
    }
}

impl ConditionalLm for NGramLm {
    fn log_prob(&self, history: &[usize], word: usize) -> f64 {
        self.prob_in_context(&self.padded_context(history), word).ln()
    }
}

/// Per-word cross-entropy of a sentence, in nats.
pub fn cross_entropy(lm: &impl ConditionalLm, sentence: &[usize]) -> Result<f64> {
    if sentence.is_empty() {
        return Err(Error::Empty("sentence"));
    }
    let nll: f64 = (0..sentence.len())
        .map(|i| -lm.log_prob(&sentence[..i], sentence[i]))
        .sum();
    Ok(nll / sentence.len() as f64)
}

/// `H_in(s) - H_out(s)`; lower means more in-domain.
pub fn ce_diff_score(
    lm_in: &impl ConditionalLm,
    lm_out: &impl ConditionalLm,
    sentence: &[usize],
) -> Result<f64> {
    Ok(cross_entropy(lm_in, sentence)? - cross_entropy(lm_out, sentence)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Vocabulary with tokens w0..w{n-1} at ids 4..4+n.
    pub(crate) fn vocab(n: usize) -> Vocabulary {
        let toks: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        Vocabulary::build(std::iter::once(toks.as_slice()), n, 1).unwrap()
    }

    struct Unigram(HashMap<usize, f64>);
    impl ConditionalLm for Unigram {
        fn log_prob(&self, _h: &[usize], w: usize) -> f64 {
            self.0[&w].ln()
        }
    }

    fn sum_over_events(lm: &NGramLm, ctx: &[usize]) -> f64 {
        lm.events().map(|w| lm.prob_in_context(ctx, w)).sum()
    }

    #[test]
    fn unigram_on_repeated_token() {
        let v = vocab(3);
        let lm = NGramLm::train(&[vec![4, 4, 4]], 1, 0.7, &v).unwrap();
        let pa = lm.prob_in_context(&[], 4);
        assert!(pa > lm.prob_in_context(&[], 5));
        assert!((sum_over_events(&lm, &[]) - 1.0).abs() < 1e-12);
        // (3 - 0.7)/3 + 0.7/3 * 1/4
        assert!((pa - (2.3 / 3.0 + 0.7 / 3.0 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn balanced_unigram_is_symmetric() {
        let v = vocab(4);
        let lm = NGramLm::train(&[vec![4, 5, 5, 4], vec![5, 4]], 1, 0.7, &v).unwrap();
        assert_eq!(lm.prob_in_context(&[], 4), lm.prob_in_context(&[], 5));
    }

    #[test]
    fn bigram_matches_counting_script() {
        // Hand-computed reference over a 10-sentence corpus with vocabulary
        // {UNK, a=4, b=5, c=6}; event count 4.
        let v = vocab(3);
        let corpus: Vec<Vec<usize>> = vec![
            vec![4, 5],
            vec![4, 5, 6],
            vec![5, 6],
            vec![4, 4],
            vec![6],
            vec![4, 5, 5],
            vec![6, 4],
            vec![5],
            vec![4, 6, 5],
            vec![1, 4],
        ];
        let lm = NGramLm::train(&corpus, 2, 0.7, &v).unwrap();
        // Brute-force counts.
        let mut uni: HashMap<usize, f64> = HashMap::new();
        let mut bi: HashMap<(usize, usize), f64> = HashMap::new();
        let mut n = 0.0;
        for s in &corpus {
            let mut prev = BOS;
            for &w in s {
                *uni.entry(w).or_default() += 1.0;
                *bi.entry((prev, w)).or_default() += 1.0;
                prev = w;
                n += 1.0;
            }
        }
        let d = 0.7;
        let p_uni = |w: usize| {
            let c = uni.get(&w).copied().unwrap_or(0.0);
            (c - d).max(0.0) / n + d * uni.len() as f64 / n / 4.0
        };
        for ctx in [BOS, 4, 5, 6, 1] {
            let c_h: f64 = bi.iter().filter(|((h, _), _)| *h == ctx).map(|(_, c)| c).sum();
            let types = bi.keys().filter(|(h, _)| *h == ctx).count() as f64;
            for w in [1, 4, 5, 6] {
                let expected = if c_h == 0.0 {
                    p_uni(w)
                } else {
                    let c = bi.get(&(ctx, w)).copied().unwrap_or(0.0);
                    (c - d).max(0.0) / c_h + d * types / c_h * p_uni(w)
                };
                let got = lm.prob_in_context(&[ctx], w);
                assert!((got - expected).abs() < 1e-15, "ctx {ctx} w {w}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn empty_corpus_rejected() {
        let v = vocab(2);
        assert!(NGramLm::train::<Vec<usize>>(&[], 3, 0.7, &v).is_err());
        assert!(NGramLm::train(&[Vec::<usize>::new()], 3, 0.7, &v).is_err());
        assert!(NGramLm::train(&[vec![4]], 0, 0.7, &v).is_err());
    }

    #[test]
    fn identical_models_score_zero() {
        let v = vocab(3);
        let lm = NGramLm::train(&[vec![4, 5, 6, 4]], 3, 0.7, &v).unwrap();
        for s in [vec![4], vec![6, 6, 5], vec![1, 4, 5]] {
            assert_eq!(ce_diff_score(&lm, &lm, &s).unwrap(), 0.0);
        }
        assert!(ce_diff_score(&lm, &lm, &[]).is_err());
    }

    #[test]
    fn unigram_score_reference() {
        let lm_in = Unigram(HashMap::from([(4, 0.5)]));
        let lm_out = Unigram(HashMap::from([(4, 0.25)]));
        // -ln 0.5 + ln 0.25 = -ln 2
        let s = ce_diff_score(&lm_in, &lm_out, &[4]).unwrap();
        assert!((s + std::f64::consts::LN_2).abs() < 1e-15);
        let longer = ce_diff_score(&lm_in, &lm_out, &[4; 7]).unwrap();
        assert!((longer - s).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn conditionals_normalize(
            corpus in prop::collection::vec(prop::collection::vec(1usize..10, 1..8), 1..12),
            probe in prop::collection::vec(0usize..10, 0..4),
            order in 1usize..4,
        ) {
            let v = vocab(6);
            let lm = NGramLm::train(&corpus, order, 0.7, &v).unwrap();
            let ctx = lm.padded_context(&probe);
            prop_assert!((sum_over_events(&lm, &ctx) - 1.0).abs() < 1e-6);
            for c in lm.contexts() {
                prop_assert!((sum_over_events(&lm, c) - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn lowering_in_domain_probability_never_lowers_score(
            probs in prop::collection::vec(0.05f64..1.0, 3),
            out in prop::collection::vec(0.05f64..1.0, 3),
            sentence in prop::collection::vec(4usize..6, 1..6),
            shrink in 0.1f64..0.99,
        ) {
            let norm = |p: &[f64]| -> HashMap<usize, f64> {
                let s: f64 = p.iter().sum();
                p.iter().enumerate().map(|(i, x)| (i + 4, x / s)).collect()
            };
            // Lower P_in of a sentence word and move the mass to word 6,
            // which never occurs in the sentence.
            let target = sentence[0];
            let base = norm(&probs);
            let mut lowered = base.clone();
            let taken = base[&target] * (1.0 - shrink);
            *lowered.get_mut(&target).unwrap() -= taken;
            *lowered.get_mut(&6).unwrap() += taken;
            let out = Unigram(norm(&out));
            let before = ce_diff_score(&Unigram(base), &out, &sentence).unwrap();
            let after = ce_diff_score(&Unigram(lowered), &out, &sentence).unwrap();
            prop_assert!(after >= before);
        }
    }
}
