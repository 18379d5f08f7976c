use std::fmt;
use std::str::FromStr;

use super::layout::*;
use crate::error::{Error, Result};
use crate::store::ParamStore;

/// Initialization configurations of the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    NoPretraining,
    Embeddings,
    Encoder,
    Decoder,
    EncDec,
    DistantAll,
    EncDecDist,
}

/// Which pre-training stage a loaded group comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    EncoderLm,
    DecoderLm,
    /// Connections-only distant phase started from both language models.
    Distant,
    /// Distant phase over all groups started from a random model.
    DistantAll,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::EncoderLm => "encoder",
            Source::DecoderLm => "decoder",
            Source::Distant => "distant",
            Source::DistantAll => "distant-all",
        }
    }
}

pub const ALL_REGIMES: [Regime; 7] = [
    Regime::NoPretraining,
    Regime::Embeddings,
    Regime::Encoder,
    Regime::Decoder,
    Regime::EncDec,
    Regime::DistantAll,
    Regime::EncDecDist,
];

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::NoPretraining => "none",
            Regime::Embeddings => "embeddings",
            Regime::Encoder => "encoder",
            Regime::Decoder => "decoder",
            Regime::EncDec => "enc-dec",
            Regime::DistantAll => "distant-all",
            Regime::EncDecDist => "enc-dec-dist",
        }
    }

    /// Groups copied from checkpoints, each with its source stage.
    pub fn loaded_groups(self) -> Vec<(&'static str, Source)> {
        let encoder = ENCODER_GROUPS.iter().map(|&g| (g, Source::EncoderLm));
        let decoder = DECODER_LM_GROUPS.iter().map(|&g| (g, Source::DecoderLm));
        match self {
            Regime::NoPretraining => vec![],
            Regime::Embeddings => vec![(ENC_EMBED, Source::EncoderLm), (DEC_EMBED, Source::DecoderLm)],
            Regime::Encoder => encoder.collect(),
            Regime::Decoder => decoder.collect(),
            Regime::EncDec => encoder.chain(decoder).collect(),
            Regime::DistantAll => NHG_GROUPS.iter().map(|&g| (g, Source::DistantAll)).collect(),
            Regime::EncDecDist => NHG_GROUPS.iter().map(|&g| (g, Source::Distant)).collect(),
        }
    }

    pub fn required_sources(self) -> Vec<Source> {
        let mut out: Vec<Source> = Vec::new();
        for (_, s) in self.loaded_groups() {
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_REGIMES
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown regime `{s}`")))
    }
}

/// Pre-trained parameter stores available to [`init_from_regime`].
#[derive(Debug, Clone, Default)]
pub struct Checkpoints {
    pub encoder: Option<ParamStore>,
    pub decoder: Option<ParamStore>,
    pub distant: Option<ParamStore>,
    pub distant_all: Option<ParamStore>,
}

impl Checkpoints {
    pub fn get(&self, source: Source) -> Option<&ParamStore> {
        match source {
            Source::EncoderLm => self.encoder.as_ref(),
            Source::DecoderLm => self.decoder.as_ref(),
            Source::Distant => self.distant.as_ref(),
            Source::DistantAll => self.distant_all.as_ref(),
        }
    }
}

/// Random stream for groups no checkpoint provides.
pub const INIT_STREAM: &str = "nhg-init";

/// A full model whose regime groups are copied from the matching
/// checkpoints and whose remaining groups are freshly initialized.
pub fn init_from_regime(
    regime: Regime,
    checkpoints: &Checkpoints,
    dims: &Dims,
    seed: u64,
) -> Result<ParamStore> {
    let mut store = random_store(&NHG_GROUPS, dims, seed, INIT_STREAM)?;
    for (group, source) in regime.loaded_groups() {
        let ckpt = checkpoints.get(source).ok_or_else(|| {
            Error::MissingGroup(format!(
                "{group} (regime {regime} needs the {} checkpoint)",
                source.name()
            ))
        })?;
        if !ckpt.has_group(group) {
            return Err(Error::MissingGroup(format!(
                "{group} (absent from the {} checkpoint)",
                source.name()
            )));
        }
        store.copy_group_from(ckpt, group)?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> Dims {
        Dims {
            enc_vocab: 10,
            dec_vocab: 8,
            embed: 3,
            hidden: 3,
        }
    }

    #[test]
    fn names_round_trip() {
        for r in ALL_REGIMES {
            assert_eq!(r.name().parse::<Regime>().unwrap(), r);
        }
        assert!("bogus".parse::<Regime>().is_err());
    }

    #[test]
    fn missing_checkpoint_names_group() {
        let err = init_from_regime(Regime::Encoder, &Checkpoints::default(), &dims(), 1).unwrap_err();
        assert!(err.to_string().contains("enc.embed"), "{err}");
        assert!(init_from_regime(Regime::NoPretraining, &Checkpoints::default(), &dims(), 1).is_ok());
    }

    #[test]
    fn loads_exactly_declared_groups() {
        let enc = random_store(&ENCODER_GROUPS, &dims(), 11, "enc").unwrap();
        let dec = random_store(&DECODER_LM_GROUPS, &dims(), 12, "dec").unwrap();
        let ck = Checkpoints {
            encoder: Some(enc.clone()),
            decoder: Some(dec.clone()),
            ..Checkpoints::default()
        };
        let s = init_from_regime(Regime::Embeddings, &ck, &dims(), 1).unwrap();
        assert!(s.group_bit_eq(&enc, ENC_EMBED));
        assert!(s.group_bit_eq(&dec, DEC_EMBED));
        assert!(!s.group_bit_eq(&dec, DEC_OUTPUT));
        assert!(!s.group_bit_eq(&enc, ENC_FWD));
        let s = init_from_regime(Regime::EncDec, &ck, &dims(), 1).unwrap();
        for g in NHG_GROUPS {
            let matched = s.group_bit_eq(&enc, g) || s.group_bit_eq(&dec, g);
            assert_eq!(matched, !CONNECTING_GROUPS.contains(&g), "{g}");
        }
    }
}
