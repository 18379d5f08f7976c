use std::path::Path;

use sha2::{Digest, Sha256};

use crate::checkpoint::ConfigHash;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::numerics::AdamHyper;
use crate::selection::{NGramConfig, DEFAULT_GRID};
use crate::train::TrainConfig;

/// Effective experiment configuration. Stored as flat `key = value` text;
/// every field can be overridden from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub hidden: usize,
    pub embed: usize,
    pub vocab_max: usize,
    pub vocab_min_count: u64,
    pub batch_size: usize,
    pub adam: AdamHyper,
    pub clip: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub max_doc_tokens: usize,
    pub window: usize,
    pub ngram_order: usize,
    pub ngram_discount: f64,
    pub cutoff_grid: Vec<f64>,
    pub seed: u64,
    pub beam: usize,
    pub max_len: usize,
    pub ci_level: f64,
    pub resamples: usize,
}

impl Default for Config {
    fn default() -> Self {
        let train = TrainConfig::default();
        let eval = EvalConfig::default();
        let ngram = NGramConfig::default();
        Config {
            hidden: 256,
            embed: 256,
            vocab_max: 50000,
            vocab_min_count: 3,
            batch_size: train.batch_size,
            adam: train.adam,
            clip: train.clip,
            max_epochs: train.max_epochs,
            patience: train.patience,
            max_doc_tokens: eval.max_doc_tokens,
            window: 100,
            ngram_order: ngram.order,
            ngram_discount: ngram.discount,
            cutoff_grid: DEFAULT_GRID.to_vec(),
            seed: 1,
            beam: eval.beam,
            max_len: eval.max_len,
            ci_level: eval.level,
            resamples: eval.resamples,
        }
    }
}

/// Keys that only affect decoding and evaluation; they are left out of the
/// config hash so that checkpoints stay valid when they change.
const UNHASHED: [&str; 4] = ["beam", "max_len", "ci_level", "resamples"];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

impl Config {
    /// `(key, rendered value)` for every field, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let grid: Vec<String> = self.cutoff_grid.iter().map(|f| f.to_string()).collect();
        vec![
            ("hidden", self.hidden.to_string()),
            ("embed", self.embed.to_string()),
            ("vocab_max", self.vocab_max.to_string()),
            ("vocab_min_count", self.vocab_min_count.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("adam_alpha", self.adam.alpha.to_string()),
            ("adam_beta1", self.adam.beta1.to_string()),
            ("adam_beta2", self.adam.beta2.to_string()),
            ("adam_epsilon", self.adam.epsilon.to_string()),
            ("adam_lambda", self.adam.lambda.to_string()),
            ("clip", self.clip.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("max_doc_tokens", self.max_doc_tokens.to_string()),
            ("window", self.window.to_string()),
            ("ngram_order", self.ngram_order.to_string()),
            ("ngram_discount", self.ngram_discount.to_string()),
            ("cutoff_grid", grid.join(",")),
            ("seed", self.seed.to_string()),
            ("beam", self.beam.to_string()),
            ("max_len", self.max_len.to_string()),
            ("ci_level", self.ci_level.to_string()),
            ("resamples", self.resamples.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "hidden" => self.hidden = parse_num(key, v)?,
            "embed" => self.embed = parse_num(key, v)?,
            "vocab_max" => self.vocab_max = parse_num(key, v)?,
            "vocab_min_count" => self.vocab_min_count = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "adam_alpha" => self.adam.alpha = parse_num(key, v)?,
            "adam_beta1" => self.adam.beta1 = parse_num(key, v)?,
            "adam_beta2" => self.adam.beta2 = parse_num(key, v)?,
            "adam_epsilon" => self.adam.epsilon = parse_num(key, v)?,
            "adam_lambda" => self.adam.lambda = parse_num(key, v)?,
            "clip" => self.clip = parse_num(key, v)?,
            "max_epochs" => self.max_epochs = parse_num(key, v)?,
            "patience" => self.patience = parse_num(key, v)?,
            "max_doc_tokens" => self.max_doc_tokens = parse_num(key, v)?,
            "window" => self.window = parse_num(key, v)?,
            "ngram_order" => self.ngram_order = parse_num(key, v)?,
            "ngram_discount" => self.ngram_discount = parse_num(key, v)?,
            "cutoff_grid" => {
                self.cutoff_grid = v
                    .split(',')
                    .map(|f| parse_num(key, f.trim()))
                    .collect::<Result<_>>()?
            }
            "seed" => self.seed = parse_num(key, v)?,
            "beam" => self.beam = parse_num(key, v)?,
            "max_len" => self.max_len = parse_num(key, v)?,
            "ci_level" => self.ci_level = parse_num(key, v)?,
            "resamples" => self.resamples = parse_num(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |e: Error| Error::Config(format!("{}:{}: {e}", path.display(), i + 1));
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at(Error::Config("expected `key = value`".into())))?;
            cfg.set(k, v).map_err(at)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.hidden == 0 || self.embed == 0 {
            return bad("hidden and embed must be at least 1".into());
        }
        if self.vocab_max == 0 || self.vocab_min_count == 0 {
            return bad("vocab_max and vocab_min_count must be at least 1".into());
        }
        if self.max_doc_tokens == 0 || self.window == 0 {
            return bad("max_doc_tokens and window must be at least 1".into());
        }
        if self.ngram_order == 0 || !(self.ngram_discount > 0.0 && self.ngram_discount < 1.0) {
            return bad(format!(
                "n-gram order {} / discount {} invalid",
                self.ngram_order, self.ngram_discount
            ));
        }
        if self.cutoff_grid.is_empty() || self.cutoff_grid.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return bad(format!("cutoff_grid {:?} must hold fractions in (0, 1]", self.cutoff_grid));
        }
        if self.beam == 0 || self.max_len == 0 || self.resamples == 0 {
            return bad("beam, max_len and resamples must be at least 1".into());
        }
        if !(self.ci_level > 0.5 && self.ci_level < 1.0) {
            return bad(format!("ci_level {} outside (0.5, 1)", self.ci_level));
        }
        self.train_config().validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 over the rendered values of every key that influences a
    /// trained artifact.
    pub fn hash(&self) -> ConfigHash {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if !UNHASHED.contains(&k) {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        h.finalize().into()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            adam: self.adam,
            batch_size: self.batch_size,
            clip: self.clip,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            beam: self.beam,
            max_len: self.max_len,
            max_doc_tokens: self.max_doc_tokens,
            level: self.ci_level,
            resamples: self.resamples,
            seed: self.seed,
        }
    }

    pub fn ngram(&self) -> NGramConfig {
        NGramConfig {
            order: self.ngram_order,
            discount: self.ngram_discount,
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = Config::default();
        assert_eq!((c.hidden, c.embed, c.vocab_max, c.vocab_min_count), (256, 256, 50000, 3));
        assert_eq!((c.batch_size, c.clip, c.beam, c.window), (128, 5.0, 5, 100));
        c.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut c = Config::default();
        c.set("adam_alpha", "0.0003").unwrap();
        c.set("cutoff_grid", "0.25, 1").unwrap();
        let back = Config::parse(&c.to_text(), Path::new("c")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn hash_ignores_decoding_keys_only() {
        let base = Config::default();
        let mut c = base.clone();
        c.set("beam", "1").unwrap();
        assert_eq!(c.hash(), base.hash());
        c.set("seed", "2").unwrap();
        assert_ne!(c.hash(), base.hash());
    }

    #[test]
    fn errors_name_line() {
        let e = Config::parse("hidden = 8\n\nbogus = 1\n", Path::new("exp.cfg")).unwrap_err();
        assert!(e.to_string().contains("exp.cfg:3"), "{e}");
        assert!(Config::parse("hidden = x\n", Path::new("c")).is_err());
        assert!(Config::parse("hidden 8\n", Path::new("c")).is_err());
        assert!(Config::parse("cutoff_grid = 0,1\n", Path::new("c")).is_err());
        assert!(Config::parse("# comment\nhidden=8\n", Path::new("c")).is_ok());
    }
}
