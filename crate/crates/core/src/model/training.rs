use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::layout::CONNECTING_GROUPS;
use super::nhg::{nhg_sum_loss, nhg_token_nlls};
use crate::corpus::{HeadlinePair, TokenizedPair};
use crate::error::{Error, Result};
use crate::lm::Perplexity;
use crate::numerics::{Tape, Var};
use crate::store::ParamStore;
use crate::train::{fit, TrainConfig, TrainLog};

/// Which groups the distant phase updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistantMode {
    /// Only attention, decoder initialization and the decoder context block.
    Connections,
    All,
}

impl DistantMode {
    pub fn name(self) -> &'static str {
        match self {
            DistantMode::Connections => "connections",
            DistantMode::All => "all",
        }
    }
}

impl fmt::Display for DistantMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistantMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "connections" => Ok(DistantMode::Connections),
            "all" => Ok(DistantMode::All),
            _ => Err(Error::Config(format!("unknown distant mode `{s}`"))),
        }
    }
}

/// Pseudo pairs from one document: every retained sentence starting before
/// token `window` becomes a headline for the rest of the document. Sentences
/// that are the whole document are skipped, since their source would be empty.
pub fn make_pseudo_pairs(doc: &TokenizedPair, retained: &[usize], window: usize) -> Vec<TokenizedPair> {
    let spans = crate::corpus::sentence_spans(&doc.sentence_starts, doc.document.len());
    let mut out = Vec::new();
    for (k, &(start, end)) in spans.iter().enumerate() {
        if start >= window || !retained.contains(&k) || end - start == doc.document.len() {
            continue;
        }
        let mut document = Vec::with_capacity(doc.document.len() - (end - start));
        let mut sentence_starts = Vec::with_capacity(spans.len() - 1);
        for (j, &(s, e)) in spans.iter().enumerate() {
            if j != k {
                sentence_starts.push(document.len());
                document.extend_from_slice(&doc.document[s..e]);
            }
        }
        out.push(TokenizedPair {
            id: format!("{}#{k}", doc.id),
            headline: doc.document[start..end].to_vec(),
            document,
            sentence_starts,
        });
    }
    out
}

/// Perplexity of headlines (and their EOS) given their documents.
pub fn nhg_perplexity(store: &ParamStore, pairs: &[HeadlinePair], max_doc_tokens: usize) -> Result<Perplexity> {
    let per: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|p| {
            let n = p.document_ids.len().min(max_doc_tokens);
            nhg_token_nlls(store, &p.document_ids[..n], &p.headline_ids)
        })
        .collect::<Result<_>>()?;
    Perplexity::from_nlls(per.into_iter().flatten().collect())
}

#[allow(clippy::too_many_arguments)]
fn fit_nhg(
    store: ParamStore,
    trainable: impl Fn(&ParamStore, crate::store::ParamId) -> bool,
    train: &[HeadlinePair],
    valid: &[HeadlinePair],
    cfg: &TrainConfig,
    max_doc_tokens: usize,
    stream: &str,
    validation_source: &str,
) -> Result<(ParamStore, TrainLog)> {
    if valid.is_empty() {
        return Err(Error::Empty("validation pairs"));
    }
    if max_doc_tokens == 0 {
        return Err(Error::invalid("max_doc_tokens must be at least 1"));
    }
    let examples: Vec<HeadlinePair> = train
        .iter()
        .filter(|p| !p.document_ids.is_empty())
        .map(|p| p.truncated(max_doc_tokens))
        .collect();
    let lengths: Vec<usize> = examples.iter().map(|p| p.document_ids.len()).collect();
    let loss = |tape: &mut Tape<'_>, p: &HeadlinePair| -> Result<(Var, usize)> {
        nhg_sum_loss(tape, &p.document_ids, &p.headline_ids)
    };
    fit(
        store,
        trainable,
        &examples,
        &lengths,
        &loss,
        |s| Ok(nhg_perplexity(s, valid, max_doc_tokens)?.ppl),
        validation_source,
        cfg,
        stream,
    )
}

/// Teacher-forced training of every group, early-stopped on validation perplexity.
pub fn train_nhg(
    store: ParamStore,
    train: &[HeadlinePair],
    valid: &[HeadlinePair],
    cfg: &TrainConfig,
    max_doc_tokens: usize,
) -> Result<(ParamStore, TrainLog)> {
    if train.is_empty() {
        return Err(Error::Empty("training pairs"));
    }
    fit_nhg(store, |_, _| true, train, valid, cfg, max_doc_tokens, "nhg", "validation headlines")
}

/// Trains on pseudo pairs, early-stopping on real validation headlines.
pub fn pretrain_distant(
    store: ParamStore,
    pseudo: &[HeadlinePair],
    valid: &[HeadlinePair],
    mode: DistantMode,
    cfg: &TrainConfig,
    max_doc_tokens: usize,
) -> Result<(ParamStore, TrainLog)> {
    if pseudo.is_empty() {
        return Err(Error::Empty("pseudo-headline pairs"));
    }
    let stream = format!("distant-{mode}");
    fit_nhg(
        store,
        |s, id| mode == DistantMode::All || CONNECTING_GROUPS.contains(&s.group_of(id)),
        pseudo,
        valid,
        cfg,
        max_doc_tokens,
        &stream,
        "validation headlines",
    )
}
