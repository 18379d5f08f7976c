use std::cmp::Ordering;

use crate::corpus::{BOS, EOS, PAD};
use crate::error::{Error, Result};
use crate::model::{encode, init_decoder_state, AttentionVars, StepVars};
use crate::numerics::{log_sum_exp, Tape, Var};
use crate::store::ParamStore;

/// A finished or partial headline.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Generated tokens, without BOS and without the final EOS.
    pub tokens: Vec<usize>,
    /// Sum of per-step log probabilities, including EOS when finished.
    pub score: f64,
    pub finished: bool,
}

struct Active {
    tokens: Vec<usize>,
    score: f64,
    state: Var,
}

/// Length-synchronous beam search without length normalization.
///
/// Each step expands every active hypothesis over the whole decoder
/// vocabulary and keeps the `beam` best candidates, ordered by score, then
/// token id, then parent index. PAD and BOS are never generated. Candidates
/// ending in EOS are retired. The search stops once no active hypothesis can
/// beat the best retired one; hypotheses still active at `max_len` compete
/// with the retired ones on raw score.
pub fn beam_search(store: &ParamStore, document: &[usize], beam: usize, max_len: usize) -> Result<Hypothesis> {
    if beam == 0 || max_len == 0 {
        return Err(Error::invalid(format!("beam {beam} and max_len {max_len} must be at least 1")));
    }
    let mut tape = Tape::new(store);
    let ann = encode(&mut tape, document)?;
    let att = AttentionVars::load(&mut tape)?;
    let keys = att.keys(&mut tape, &ann)?;
    let dec = StepVars::decoder(&mut tape)?;
    let s0 = init_decoder_state(&mut tape, &ann)?;
    let mut active = vec![Active {
        tokens: vec![],
        score: 0.0,
        state: s0,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for _ in 0..max_len {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        let mut next_states = Vec::with_capacity(active.len());
        for (i, h) in active.iter().enumerate() {
            let prev = *h.tokens.last().unwrap_or(&BOS);
            let ctx = att.attend(&mut tape, h.state, keys, &ann)?;
            let (s, logits) = dec.step(&mut tape, prev, h.state, Some(ctx))?;
            let lv = tape.value(logits);
            let lse = log_sum_exp(lv);
            candidates.extend(
                lv.iter()
                    .enumerate()
                    .filter(|&(w, _)| w != PAD && w != BOS)
                    .map(|(w, &l)| (h.score - (lse - l), w, i)),
            );
            next_states.push(s);
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        candidates.truncate(beam);
        let mut next = Vec::with_capacity(beam);
        for (score, w, i) in candidates {
            let mut tokens = active[i].tokens.clone();
            if w == EOS {
                finished.push(Hypothesis {
                    tokens,
                    score,
                    finished: true,
                });
            } else {
                tokens.push(w);
                next.push(Active {
                    tokens,
                    score,
                    state: next_states[i],
                });
            }
        }
        active = next;
        let best_finished = finished.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        let best_active = active.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        if active.is_empty() || best_finished >= best_active {
            break;
        }
    }
    // Finished hypotheses first so that score ties favour them.
    let best = finished
        .into_iter()
        .chain(active.into_iter().map(|a| Hypothesis {
            tokens: a.tokens,
            score: a.score,
            finished: false,
        }))
        .reduce(|best, h| if h.score > best.score { h } else { best })
        .expect("the first step always yields a candidate");
    Ok(best)
}
