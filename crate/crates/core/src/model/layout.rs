//! Parameter groups of the encoder-decoder and their random initialization.

use crate::error::{Error, Result};
use crate::numerics::{derive_rng, glorot_init, Tensor};
use crate::store::ParamStore;

pub const ENC_EMBED: &str = "enc.embed";
pub const ENC_FWD: &str = "enc.fwd";
pub const ENC_BWD: &str = "enc.bwd";
pub const DEC_EMBED: &str = "dec.embed";
pub const DEC_EMBED_BLOCK: &str = "dec.gru.embed_block";
pub const DEC_CONTEXT_BLOCK: &str = "dec.gru.context_block";
pub const DEC_RECURRENT: &str = "dec.gru.recurrent";
pub const DEC_OUTPUT: &str = "dec.output";
pub const CONNECT_ATTENTION: &str = "connect.attention";
pub const CONNECT_INIT: &str = "connect.init";

/// Output layers used only while pre-training the encoder GRUs as LMs.
pub const LM_FWD_OUTPUT: &str = "lm.fwd.output";
pub const LM_BWD_OUTPUT: &str = "lm.bwd.output";

/// Every group of the full model, in storage order.
pub const NHG_GROUPS: [&str; 10] = [
    ENC_EMBED,
    ENC_FWD,
    ENC_BWD,
    DEC_EMBED,
    DEC_EMBED_BLOCK,
    DEC_CONTEXT_BLOCK,
    DEC_RECURRENT,
    DEC_OUTPUT,
    CONNECT_ATTENTION,
    CONNECT_INIT,
];

pub const ENCODER_GROUPS: [&str; 3] = [ENC_EMBED, ENC_FWD, ENC_BWD];

/// Groups a decoder language model can pre-train.
pub const DECODER_LM_GROUPS: [&str; 4] = [DEC_EMBED, DEC_EMBED_BLOCK, DEC_RECURRENT, DEC_OUTPUT];

/// Groups that join encoder and decoder and that no LM touches.
pub const CONNECTING_GROUPS: [&str; 3] = [CONNECT_ATTENTION, CONNECT_INIT, DEC_CONTEXT_BLOCK];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub enc_vocab: usize,
    pub dec_vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl Dims {
    pub fn attention(&self) -> usize {
        self.hidden
    }

    pub fn validate(&self) -> Result<()> {
        if self.enc_vocab < 5 || self.dec_vocab < 5 || self.embed == 0 || self.hidden == 0 {
            return Err(Error::invalid(format!("degenerate model dimensions {self:?}")));
        }
        Ok(())
    }

    /// Reads dimensions back from a full model store.
    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let (enc_vocab, embed) = store.by_name(&format!("{ENC_EMBED}/E"))?.dims2();
        let dec_vocab = store.by_name(&format!("{DEC_EMBED}/E"))?.dims2().0;
        let hidden = store.by_name(&format!("{ENC_FWD}/U_z"))?.dims2().0;
        Ok(Dims {
            enc_vocab,
            dec_vocab,
            embed,
            hidden,
        })
    }
}

enum Init {
    /// Glorot uniform with the given fans; the tensor has shape `fan_out x fan_in`.
    Glorot(usize, usize),
    /// Glorot vector of length `n` (treated as `1 x n`).
    GlorotVector(usize),
    Zero(usize),
}

fn group_tensors(group: &str, d: &Dims) -> Result<Vec<(String, Init)>> {
    let (e, h, a) = (d.embed, d.hidden, d.attention());
    let gru_input = |input: usize| -> Vec<(String, Init)> {
        ["z", "r", "h"]
            .iter()
            .map(|g| (format!("W_{g}"), Init::Glorot(input, h)))
            .collect()
    };
    let recurrent = || -> Vec<(String, Init)> {
        let mut v: Vec<(String, Init)> = ["z", "r", "h"]
            .iter()
            .map(|g| (format!("U_{g}"), Init::Glorot(h, h)))
            .collect();
        v.extend(["z", "r", "h"].iter().map(|g| (format!("b_{g}"), Init::Zero(h))));
        v
    };
    let output = |vocab: usize| {
        vec![
            ("W".to_string(), Init::Glorot(h, vocab)),
            ("b".to_string(), Init::Zero(vocab)),
        ]
    };
    Ok(match group {
        ENC_EMBED => vec![("E".into(), Init::Glorot(e, d.enc_vocab))],
        DEC_EMBED => vec![("E".into(), Init::Glorot(e, d.dec_vocab))],
        ENC_FWD | ENC_BWD => {
            let mut v = gru_input(e);
            v.extend(recurrent());
            v
        }
        DEC_EMBED_BLOCK => gru_input(e),
        DEC_CONTEXT_BLOCK => ["z", "r", "h"]
            .iter()
            .map(|g| (format!("C_{g}"), Init::Glorot(2 * h, h)))
            .collect(),
        DEC_RECURRENT => recurrent(),
        DEC_OUTPUT => output(d.dec_vocab),
        LM_FWD_OUTPUT | LM_BWD_OUTPUT => output(d.enc_vocab),
        CONNECT_ATTENTION => vec![
            ("W_a".into(), Init::Glorot(h, a)),
            ("U_a".into(), Init::Glorot(2 * h, a)),
            ("v_a".into(), Init::GlorotVector(a)),
        ],
        CONNECT_INIT => vec![
            ("W_s".into(), Init::Glorot(h, h)),
            ("b_s".into(), Init::Zero(h)),
        ],
        other => return Err(Error::MissingGroup(other.to_string())),
    })
}

/// Adds freshly initialized tensors for `group`: Glorot-uniform weights and
/// zero biases. The values depend only on `(seed, stream, group)`.
pub fn init_group(
    store: &mut ParamStore,
    group: &str,
    dims: &Dims,
    seed: u64,
    stream: &str,
) -> Result<()> {
    let mut rng = derive_rng(seed, &format!("{stream}/{group}"));
    for (name, init) in group_tensors(group, dims)? {
        let t = match init {
            Init::Glorot(fan_in, fan_out) => glorot_init(fan_in, fan_out, &mut rng)?,
            Init::GlorotVector(n) => {
                Tensor::vector(glorot_init(n, 1, &mut rng)?.data().to_vec())
            }
            Init::Zero(n) => Tensor::zeros(vec![n]),
        };
        store.insert(format!("{group}/{name}"), t)?;
    }
    Ok(())
}

/// A store with every listed group randomly initialized.
pub fn random_store(groups: &[&str], dims: &Dims, seed: u64, stream: &str) -> Result<ParamStore> {
    dims.validate()?;
    let mut store = ParamStore::new();
    for g in groups {
        init_group(&mut store, g, dims, seed, stream)?;
    }
    Ok(store)
}
