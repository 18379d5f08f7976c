//! GRU language models used to pre-train the encoder and decoder.
//!
//! A language model is a view on a subset of the model's parameter groups
//! (see [`LmLayout`]), so pre-trained groups are already named the way the
//! encoder-decoder expects them.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::corpus::{Vocabulary, BOS, EOS};
use crate::error::{Error, Result};
use crate::model::*;
use crate::numerics::{Gradients, Tape, Tensor, Var};
use crate::store::ParamStore;
use crate::train::{fit, TrainConfig, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Parameter groups making up one language model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LmLayout {
    pub embed: &'static str,
    pub input: &'static str,
    pub recurrent: &'static str,
    pub output: &'static str,
}

pub const FORWARD_ENCODER_LM: LmLayout = LmLayout {
    embed: ENC_EMBED,
    input: ENC_FWD,
    recurrent: ENC_FWD,
    output: LM_FWD_OUTPUT,
};

pub const BACKWARD_ENCODER_LM: LmLayout = LmLayout {
    embed: ENC_EMBED,
    input: ENC_BWD,
    recurrent: ENC_BWD,
    output: LM_BWD_OUTPUT,
};

pub const DECODER_LM: LmLayout = LmLayout {
    embed: DEC_EMBED,
    input: DEC_EMBED_BLOCK,
    recurrent: DEC_RECURRENT,
    output: DEC_OUTPUT,
};

impl LmLayout {
    /// Distinct groups, in storage order.
    pub fn groups(&self) -> Vec<&'static str> {
        let mut g = vec![self.embed, self.input];
        if self.recurrent != self.input {
            g.push(self.recurrent);
        }
        g.push(self.output);
        g
    }

    pub fn vars(&self, tape: &mut Tape<'_>) -> Result<StepVars> {
        StepVars::load(tape, self.embed, self.input, self.recurrent, None, self.output)
    }
}

/// Per-position NLL nodes: BOS predicts the first token, the last token
/// predicts EOS. `Backward` processes the reversed sentence.
pub fn lm_nll_terms(
    tape: &mut Tape<'_>,
    layout: &LmLayout,
    sentence: &[usize],
    direction: Direction,
) -> Result<Vec<Var>> {
    if sentence.is_empty() {
        return Err(Error::Empty("sentence"));
    }
    let vars = layout.vars(tape)?;
    let mut tokens: Vec<usize> = sentence.to_vec();
    if direction == Direction::Backward {
        tokens.reverse();
    }
    let mut s = tape.input(vec![0.0; vars.hidden(tape)]);
    let mut prev = BOS;
    let mut terms = Vec::with_capacity(tokens.len() + 1);
    for target in tokens.into_iter().chain(std::iter::once(EOS)) {
        let (next, logits) = vars.step(tape, prev, s, None)?;
        terms.push(tape.nll(logits, target)?);
        s = next;
        prev = target;
    }
    Ok(terms)
}

pub fn lm_nll(
    store: &ParamStore,
    layout: &LmLayout,
    sentence: &[usize],
    direction: Direction,
) -> Result<Vec<f64>> {
    let mut tape = Tape::new(store);
    let terms = lm_nll_terms(&mut tape, layout, sentence, direction)?;
    Ok(terms.iter().map(|&v| tape.value(v)[0]).collect())
}

/// Mean per-token NLL of one sentence and its gradients.
pub fn lm_loss_and_grads(
    store: &ParamStore,
    layout: &LmLayout,
    sentence: &[usize],
    direction: Direction,
) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new(store);
    let terms = lm_nll_terms(&mut tape, layout, sentence, direction)?;
    let sum = tape.sum_scalars(&terms)?;
    let mean = tape.scale(sum, 1.0 / terms.len() as f64);
    Ok((tape.value(mean)[0], tape.backward(mean)?))
}

/// Perplexity together with the per-token NLLs it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Perplexity {
    pub ppl: f64,
    pub nlls: Vec<f64>,
}

/// Summation runs over the sorted values so the result does not depend on
/// corpus order.
fn order_free_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

impl Perplexity {
    pub fn from_nlls(nlls: Vec<f64>) -> Result<Self> {
        if nlls.is_empty() {
            return Err(Error::Empty("perplexity corpus"));
        }
        Ok(Perplexity {
            ppl: order_free_mean(&nlls).exp(),
            nlls,
        })
    }

    pub fn mean_nll(&self) -> f64 {
        order_free_mean(&self.nlls)
    }
}

pub fn lm_perplexity(
    store: &ParamStore,
    layout: &LmLayout,
    corpus: &[Vec<usize>],
    direction: Direction,
) -> Result<Perplexity> {
    let per: Vec<Vec<f64>> = corpus
        .par_iter()
        .map(|s| lm_nll(store, layout, s, direction))
        .collect::<Result<_>>()?;
    Perplexity::from_nlls(per.into_iter().flatten().collect())
}

/// `exp(mean ± z·sd/√N)` with the sample standard deviation of the NLLs.
pub fn ppl_confidence_interval(nlls: &[f64], level: f64) -> Result<(f64, f64)> {
    if nlls.len() < 2 {
        return Err(Error::invalid(format!(
            "confidence interval needs at least 2 tokens, got {}",
            nlls.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level {level} outside (0, 1)")));
    }
    let n = nlls.len() as f64;
    let mean = order_free_mean(nlls);
    let var = nlls.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let half = z * var.sqrt() / n.sqrt();
    Ok(((mean - half).exp(), (mean + half).exp()))
}

/// Trains a language model laid out as `layout`. Groups present in `init`
/// are copied from it; the others start from a fresh random draw. Groups
/// named in `frozen` are never updated.
#[allow(clippy::too_many_arguments)]
pub fn train_lm(
    train: &[Vec<usize>],
    valid: &[Vec<usize>],
    layout: &LmLayout,
    direction: Direction,
    dims: &Dims,
    init: Option<&ParamStore>,
    frozen: &[&str],
    cfg: &TrainConfig,
    stream: &str,
    validation_source: &str,
) -> Result<(ParamStore, TrainLog)> {
    if train.is_empty() {
        return Err(Error::Empty("language model corpus"));
    }
    if valid.is_empty() {
        return Err(Error::Empty("language model validation corpus"));
    }
    let mut store = random_store(&layout.groups(), dims, cfg.seed, stream)?;
    if let Some(init) = init {
        for g in layout.groups() {
            if init.has_group(g) {
                store.copy_group_from(init, g)?;
            }
        }
    }
    let examples: Vec<&Vec<usize>> = train.iter().filter(|s| !s.is_empty()).collect();
    let lengths: Vec<usize> = examples.iter().map(|s| s.len()).collect();
    let loss = |tape: &mut Tape<'_>, s: &&Vec<usize>| -> Result<(Var, usize)> {
        let terms = lm_nll_terms(tape, layout, s, direction)?;
        Ok((tape.sum_scalars(&terms)?, terms.len()))
    };
    fit(
        store,
        |s, id| !frozen.contains(&s.group_of(id)),
        &examples,
        &lengths,
        &loss,
        |s| Ok(lm_perplexity(s, layout, valid, direction)?.ppl),
        validation_source,
        cfg,
        stream,
    )
}

/// Forward and backward encoder language models.
#[derive(Debug, Clone)]
pub struct EncoderPretraining {
    pub forward: ParamStore,
    pub backward: ParamStore,
    pub forward_log: TrainLog,
    pub backward_log: TrainLog,
}

impl EncoderPretraining {
    /// Encoder initialization: both GRUs and the shared embeddings, with the
    /// language-model output layers dropped.
    pub fn encoder_store(&self) -> Result<ParamStore> {
        let mut s = self.forward.subset(&[ENC_EMBED, ENC_FWD])?;
        s.add_group_from(&self.backward, ENC_BWD)?;
        Ok(s)
    }
}

/// Trains the forward encoder LM, then the backward one on reversed
/// sentences with the forward embeddings copied in and frozen.
pub fn pretrain_encoder(
    train: &[Vec<usize>],
    valid: &[Vec<usize>],
    dims: &Dims,
    cfg: &TrainConfig,
) -> Result<EncoderPretraining> {
    let (forward, forward_log) = train_lm(
        train,
        valid,
        &FORWARD_ENCODER_LM,
        Direction::Forward,
        dims,
        None,
        &[],
        cfg,
        "lm-enc-fwd",
        "validation document sentences",
    )?;
    let embed = forward.subset(&[ENC_EMBED])?;
    let (backward, backward_log) = train_lm(
        train,
        valid,
        &BACKWARD_ENCODER_LM,
        Direction::Backward,
        dims,
        Some(&embed),
        &[ENC_EMBED],
        cfg,
        "lm-enc-bwd",
        "validation document sentences",
    )?;
    Ok(EncoderPretraining {
        forward,
        backward,
        forward_log,
        backward_log,
    })
}

/// Copies source embedding rows into the destination for every regular
/// token present in both vocabularies; returns the number of tokens copied.
/// Special symbols are not transferred.
pub fn transfer_shared_embeddings(
    src_vocab: &Vocabulary,
    src_embed: &Tensor,
    dst_vocab: &Vocabulary,
    dst_embed: &mut Tensor,
    mut dst_output: Option<&mut Tensor>,
) -> Result<usize> {
    let (src_rows, width) = src_embed.dims2();
    let check = |context: &'static str, t: &Tensor, rows: usize| -> Result<()> {
        let (r, c) = t.dims2();
        if c != width {
            return Err(Error::Dimension {
                context,
                expected: width,
                actual: c,
            });
        }
        if r != rows {
            return Err(Error::Dimension {
                context,
                expected: rows,
                actual: r,
            });
        }
        Ok(())
    };
    check("source embedding rows", src_embed, src_vocab.len())?;
    debug_assert_eq!(src_rows, src_vocab.len());
    check("destination embedding", dst_embed, dst_vocab.len())?;
    if let Some(out) = dst_output.as_deref() {
        check("destination output layer", out, dst_vocab.len())?;
    }
    let mut copied = 0;
    for (dst_id, token) in dst_vocab.regular() {
        let Some(src_id) = src_vocab.lookup(token) else {
            continue;
        };
        let row = src_embed.row(src_id);
        dst_embed.row_mut(dst_id).copy_from_slice(row);
        if let Some(out) = dst_output.as_deref_mut() {
            out.row_mut(dst_id).copy_from_slice(row);
        }
        copied += 1;
    }
    Ok(copied)
}

/// Random decoder-LM parameters with the encoder embedding rows of shared
/// words copied into both the input embeddings and the output layer.
pub fn init_decoder_lm(
    enc_vocab: &Vocabulary,
    encoder_embed: &Tensor,
    dec_vocab: &Vocabulary,
    dims: &Dims,
    seed: u64,
) -> Result<(ParamStore, usize)> {
    let mut store = random_store(&DECODER_LM.groups(), dims, seed, "lm-dec")?;
    let mut embed = store.by_name(&format!("{DEC_EMBED}/E"))?.clone();
    let mut output = store.by_name(&format!("{DEC_OUTPUT}/W"))?.clone();
    let n = transfer_shared_embeddings(enc_vocab, encoder_embed, dec_vocab, &mut embed, Some(&mut output))?;
    store.insert(format!("{DEC_EMBED}/E"), embed)?;
    store.insert(format!("{DEC_OUTPUT}/W"), output)?;
    Ok((store, n))
}

/// Trains the decoder LM on selected document sentences, early-stopping on
/// validation headlines.
#[allow(clippy::too_many_arguments)]
pub fn pretrain_decoder(
    selected: &[Vec<usize>],
    valid_headlines: &[Vec<usize>],
    enc_vocab: &Vocabulary,
    encoder_embed: &Tensor,
    dec_vocab: &Vocabulary,
    dims: &Dims,
    cfg: &TrainConfig,
) -> Result<(ParamStore, TrainLog)> {
    let (init, _) = init_decoder_lm(enc_vocab, encoder_embed, dec_vocab, dims, cfg.seed)?;
    train_lm(
        selected,
        valid_headlines,
        &DECODER_LM,
        Direction::Forward,
        dims,
        Some(&init),
        &[],
        cfg,
        "lm-dec",
        "validation headlines",
    )
}
