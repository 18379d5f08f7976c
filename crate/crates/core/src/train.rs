//! Mini-batch training loop shared by every stage: Adam, global-norm
//! clipping over trainable parameters, and patience-based early stopping on
//! a validation perplexity.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::corpus::batch_indices;
use crate::error::{Error, Result};
use crate::numerics::{adam_step, clip_global_norm, derive_rng, AdamHyper, AdamState, Gradients, Tape, Var};
use crate::store::{ParamId, ParamStore};

/// Examples per parallel work unit. Partial sums are combined in chunk
/// order, so results do not depend on the thread count.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamHyper,
    pub batch_size: usize,
    pub clip: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamHyper::default(),
            batch_size: 128,
            clip: 5.0,
            max_epochs: 20,
            patience: 1,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.clip > 0.0) {
            return Err(Error::invalid(format!("clip threshold {} must be positive", self.clip)));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid("max_epochs and patience must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-token NLL over the epoch's training batches.
    pub train_loss: f64,
    pub valid_ppl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    /// Names the corpus the validation perplexity was computed on.
    pub validation_source: String,
}

impl TrainLog {
    pub fn best(&self) -> &EpochRecord {
        &self.records[self.best_epoch - 1]
    }

    /// Tab-separated `epoch  train_loss  valid_ppl`, one line per epoch.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(out, "{}\t{}\t{}", r.epoch, r.train_loss, r.valid_ppl);
        }
        out
    }
}

/// Builds the loss of one example on a tape: `(summed NLL node, token count)`.
pub trait ExampleLoss<E>: Sync {
    fn loss(&self, tape: &mut Tape<'_>, example: &E) -> Result<(Var, usize)>;
}

impl<E, F> ExampleLoss<E> for F
where
    F: Fn(&mut Tape<'_>, &E) -> Result<(Var, usize)> + Sync,
{
    fn loss(&self, tape: &mut Tape<'_>, example: &E) -> Result<(Var, usize)> {
        self(tape, example)
    }
}

/// Summed loss, token count and summed gradients over a set of examples.
pub fn batch_gradients<E: Sync>(
    store: &ParamStore,
    examples: &[&E],
    loss: &impl ExampleLoss<E>,
) -> Result<(f64, usize, Gradients)> {
    let parts: Vec<(f64, usize, Gradients)> = examples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grads = Gradients::zeros_like(store);
            let mut total = 0.0;
            let mut count = 0;
            for ex in chunk {
                let mut tape = Tape::new(store);
                let (l, n) = loss.loss(&mut tape, ex)?;
                total += tape.value(l)[0];
                count += n;
                tape.backward_into(l, &mut grads)?;
            }
            Ok((total, count, grads))
        })
        .collect::<Result<_>>()?;
    let mut grads = Gradients::zeros_like(store);
    let (mut total, mut count) = (0.0, 0);
    for (l, n, g) in parts {
        total += l;
        count += n;
        grads.add_assign(&g);
    }
    Ok((total, count, grads))
}

/// Trains `store` in place of a copy and returns the best-validation
/// parameters. Only parameters accepted by `trainable` are ever modified.
///
/// `validate` maps parameters to a validation perplexity; training stops
/// once it has failed to improve for `patience` consecutive epochs.
#[allow(clippy::too_many_arguments)]
pub fn fit<E: Sync>(
    store: ParamStore,
    trainable: impl Fn(&ParamStore, ParamId) -> bool,
    examples: &[E],
    lengths: &[usize],
    loss: &impl ExampleLoss<E>,
    mut validate: impl FnMut(&ParamStore) -> Result<f64>,
    validation_source: &str,
    cfg: &TrainConfig,
    stream: &str,
) -> Result<(ParamStore, TrainLog)> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if lengths.len() != examples.len() {
        return Err(Error::Dimension {
            context: "example lengths",
            expected: examples.len(),
            actual: lengths.len(),
        });
    }
    let mut store = store;
    let keep: Vec<bool> = store.ids().map(|id| trainable(&store, id)).collect();
    let mut adam = AdamState::new(&store);
    let mut records = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        let mut rng = derive_rng(cfg.seed, &format!("{stream}/epoch-{epoch}"));
        let (mut epoch_loss, mut epoch_tokens) = (0.0, 0usize);
        for batch in batch_indices(lengths, cfg.batch_size, &mut rng) {
            let refs: Vec<&E> = batch.iter().map(|&i| &examples[i]).collect();
            let (l, n, mut grads) = batch_gradients(&store, &refs, loss)?;
            if n == 0 {
                continue;
            }
            epoch_loss += l;
            epoch_tokens += n;
            grads.scale(1.0 / n as f64);
            grads.retain(|id| keep[id.index()]);
            clip_global_norm(&mut grads, cfg.clip);
            adam_step(&mut store, &grads, &mut adam, &cfg.adam)?;
        }
        if epoch_tokens == 0 {
            return Err(Error::Empty("training tokens"));
        }
        let valid_ppl = validate(&store)?;
        let train_loss = epoch_loss / epoch_tokens as f64;
        log::info!("{stream} epoch {epoch}: train loss {train_loss:.4}, valid ppl {valid_ppl:.4}");
        records.push(EpochRecord {
            epoch,
            train_loss,
            valid_ppl,
        });
        match &best {
            Some((b, _, _)) if !(valid_ppl < *b) => {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
            _ => {
                best = Some((valid_ppl, epoch, store.clone()));
                since_best = 0;
            }
        }
    }
    let (_, best_epoch, best_store) = best.ok_or(Error::Empty("training epochs"))?;
    Ok((
        best_store,
        TrainLog {
            records,
            best_epoch,
            validation_source: validation_source.to_string(),
        },
    ))
}
