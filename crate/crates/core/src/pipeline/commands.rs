use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;

use super::config::{hex, Config};
use super::manifest::{digests, file_sha256, Manifest, StageRecord};
use crate::checkpoint::{self, ConfigHash};
use crate::corpus::{
    preprocess_en, read_pairs, write_pairs, BoilerplateRules, HeadlinePair, RawPair, SentenceSplitter,
    TokenizedPair, Vocabulary, DEFAULT_ABBREVIATIONS, DEFAULT_BOILERPLATE,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_system, generate_headlines, EvalReport};
use crate::lm::{pretrain_decoder, pretrain_encoder};
use crate::model::{
    init_from_regime, make_pseudo_pairs, pretrain_distant, train_nhg, Checkpoints, Dims, DistantMode, Regime,
    Source, DECODER_LM_GROUPS, ENCODER_GROUPS, ENC_EMBED, NHG_GROUPS,
};
use crate::selection::{ranking, score_sentences, select_cutoff, NGramLm, SelectionResult};
use crate::store::ParamStore;
use crate::train::TrainLog;

pub const SPLITS: [&str; 3] = ["train", "valid", "test"];
pub const ENC_VOCAB: &str = "data/enc.vocab";
pub const DEC_VOCAB: &str = "data/dec.vocab";
pub const SELECTION_REPORT: &str = "selection/report.tsv";
pub const SELECTION_CUTOFFS: &str = "selection/cutoffs.tsv";
pub const SELECTION_RETAINED: &str = "selection/retained.tsv";
pub const ENCODER_CKPT: &str = "ckpt/encoder.ckpt";
pub const DECODER_CKPT: &str = "ckpt/decoder.ckpt";

pub fn split_path(split: &str) -> String {
    format!("data/{split}.jsonl")
}

pub fn distant_ckpt(mode: DistantMode) -> String {
    format!("ckpt/distant-{mode}.ckpt")
}

pub fn model_ckpt(regime: Regime) -> String {
    format!("ckpt/model-{regime}.ckpt")
}

fn distant_stage(mode: DistantMode) -> String {
    format!("pretrain-distant-{mode}")
}

fn train_stage(regime: Regime) -> String {
    format!("train-{regime}")
}

/// Which trained model a command should use.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelRef {
    Regime(Regime),
    Path(PathBuf),
}

impl ModelRef {
    fn name(&self) -> String {
        match self {
            ModelRef::Regime(r) => r.to_string(),
            ModelRef::Path(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "model".into()),
        }
    }
}

/// Tokenized splits and both vocabularies.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<TokenizedPair>,
    pub valid: Vec<TokenizedPair>,
    pub test: Vec<TokenizedPair>,
    pub enc: Vocabulary,
    pub dec: Vocabulary,
}

impl Dataset {
    pub fn encode(&self, pairs: &[TokenizedPair]) -> Vec<HeadlinePair> {
        pairs.iter().map(|p| p.encode(&self.enc, &self.dec)).collect()
    }

    pub fn dims(&self, cfg: &Config) -> Dims {
        Dims {
            enc_vocab: self.enc.len(),
            dec_vocab: self.dec.len(),
            embed: cfg.embed,
            hidden: cfg.hidden,
        }
    }

    fn sentences(pairs: &[TokenizedPair], vocab: &Vocabulary) -> Vec<Vec<usize>> {
        pairs
            .iter()
            .flat_map(|p| p.sentences().map(|s| vocab.encode(s)).collect::<Vec<_>>())
            .collect()
    }

    fn headlines(&self, pairs: &[TokenizedPair]) -> Vec<Vec<usize>> {
        pairs.iter().map(|p| self.dec.encode(&p.headline)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessSummary {
    pub counts: [usize; 3],
    pub enc_vocab: usize,
    pub dec_vocab: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub log: TrainLog,
    pub loaded_groups: Vec<String>,
    pub checkpoint: PathBuf,
}

/// An output directory bound to an effective configuration.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub out_dir: PathBuf,
    pub config: Config,
    hash: ConfigHash,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

impl Workspace {
    pub fn new(out_dir: impl Into<PathBuf>, config: Config) -> Result<Self> {
        config.validate()?;
        let out_dir = out_dir.into();
        std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
        let hash = config.hash();
        Ok(Workspace { out_dir, config, hash })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out_dir.join(rel)
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.hash)
    }

    pub fn manifest(&self) -> Result<Manifest> {
        Manifest::load_or_default(&self.out_dir)
    }

    fn require(&self, stage: &str, output: &str) -> Result<StageRecord> {
        Ok(self.manifest()?.require(&self.out_dir, stage, output, &self.hash_hex())?.clone())
    }

    fn record(&self, stage: &str, inputs: &[&str], outputs: &[&str], mut rec: StageRecord) -> Result<()> {
        let rels = |xs: &[&str]| xs.iter().map(PathBuf::from).collect::<Vec<_>>();
        rec.config_hash = self.hash_hex();
        rec.inputs = digests(&self.out_dir, &rels(inputs))?;
        rec.outputs = digests(&self.out_dir, &rels(outputs))?;
        let mut m = self.manifest()?;
        m.config_hash = self.hash_hex();
        m.config = self
            .config
            .entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        m.stages.insert(stage.to_string(), rec);
        m.save(&self.out_dir)
    }

    fn save_checkpoint(&self, rel: &str, store: &ParamStore) -> Result<()> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        checkpoint::save(&path, store, &self.hash)
    }

    /// Loads a checkpoint (optionally only some groups) written under the
    /// current configuration.
    pub fn load_checkpoint(&self, path: &Path, groups: Option<&[&str]>) -> Result<ParamStore> {
        let ck = match groups {
            Some(g) => checkpoint::load_groups(path, g)?,
            None => checkpoint::load(path)?,
        };
        if ck.config_hash != self.hash {
            return Err(Error::StaleArtifact {
                path: path.to_path_buf(),
                reason: format!(
                    "written under config {} but the current config is {}",
                    hex(&ck.config_hash),
                    self.hash_hex()
                ),
            });
        }
        Ok(ck.store)
    }

    pub fn splitter() -> SentenceSplitter {
        SentenceSplitter::new(DEFAULT_ABBREVIATIONS.iter().copied())
    }

    /// Preprocesses `input_dir/{train,valid,test}.jsonl` and builds the
    /// encoder (documents) and decoder (headlines) vocabularies from the
    /// training split.
    pub fn cmd_preprocess(&self, input_dir: &Path) -> Result<PreprocessSummary> {
        let rules = BoilerplateRules::new(DEFAULT_BOILERPLATE)?;
        let none = BoilerplateRules::none();
        let mut counts = [0; 3];
        let mut processed: Vec<Vec<RawPair>> = Vec::new();
        let mut inputs = Vec::new();
        for (i, split) in SPLITS.iter().enumerate() {
            let src = input_dir.join(format!("{split}.jsonl"));
            if !src.exists() {
                return Err(Error::MissingArtifact {
                    path: src,
                    reason: format!("the {split} split is required"),
                });
            }
            let raw = read_pairs(&src)?;
            if raw.is_empty() {
                return Err(Error::Format {
                    path: src,
                    line: 0,
                    message: "no pairs".into(),
                });
            }
            let mut out = Vec::with_capacity(raw.len());
            for (n, p) in raw.iter().enumerate() {
                let headline = preprocess_en(&p.headline, &none).join(" ");
                let document = preprocess_en(&p.document, &rules).join(" ");
                if headline.is_empty() || document.is_empty() {
                    return Err(Error::Format {
                        path: src.clone(),
                        line: n + 1,
                        message: format!("pair {n} is empty after preprocessing"),
                    });
                }
                let id = if p.id.is_empty() { format!("{split}-{n}") } else { p.id.clone() };
                out.push(RawPair { id, headline, document });
            }
            counts[i] = out.len();
            inputs.push(file_sha256(&src)?);
            let dst = self.path(&split_path(split));
            if let Some(dir) = dst.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            write_pairs(&dst, &out)?;
            processed.push(out);
        }
        let splitter = Self::splitter();
        let train: Vec<TokenizedPair> = processed[0]
            .iter()
            .map(|p| TokenizedPair::from_preprocessed(p, &splitter))
            .collect();
        let enc = Vocabulary::build(
            train.iter().map(|p| p.document.as_slice()),
            self.config.vocab_max,
            self.config.vocab_min_count,
        )?;
        let dec = Vocabulary::build(
            train.iter().map(|p| p.headline.as_slice()),
            self.config.vocab_max,
            self.config.vocab_min_count,
        )?;
        enc.save(&self.path(ENC_VOCAB))?;
        dec.save(&self.path(DEC_VOCAB))?;
        info!(
            "preprocessed {:?} pairs; vocabularies: {} encoder, {} decoder",
            counts,
            enc.len(),
            dec.len()
        );
        let outputs: Vec<String> = SPLITS.iter().map(|s| split_path(s)).collect();
        let mut outs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        outs.extend([ENC_VOCAB, DEC_VOCAB]);
        let mut rec = StageRecord::default();
        for (split, digest) in SPLITS.iter().zip(inputs) {
            rec.notes.insert(format!("source_{split}_sha256"), digest);
        }
        self.record("preprocess", &[], &outs, rec)?;
        Ok(PreprocessSummary {
            counts,
            enc_vocab: enc.len(),
            dec_vocab: dec.len(),
        })
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        self.require("preprocess", ENC_VOCAB)?;
        let splitter = Self::splitter();
        let load = |split: &str| -> Result<Vec<TokenizedPair>> {
            Ok(read_pairs(&self.path(&split_path(split)))?
                .iter()
                .map(|p| TokenizedPair::from_preprocessed(p, &splitter))
                .collect())
        };
        Ok(Dataset {
            train: load("train")?,
            valid: load("valid")?,
            test: load("test")?,
            enc: Vocabulary::load(&self.path(ENC_VOCAB))?,
            dec: Vocabulary::load(&self.path(DEC_VOCAB))?,
        })
    }

    /// Cross-entropy difference selection over training document sentences:
    /// in-domain model on training headlines, out-of-domain model on the
    /// document sentences themselves, cutoff chosen on validation headlines.
    pub fn cmd_select(&self) -> Result<SelectionResult> {
        let data = self.load_dataset()?;
        let in_domain = data.headlines(&data.train);
        let candidates: Vec<(usize, usize, Vec<usize>)> = data
            .train
            .iter()
            .enumerate()
            .flat_map(|(d, p)| {
                p.sentences()
                    .enumerate()
                    .map(|(k, s)| (d, k, data.dec.encode(s)))
                    .collect::<Vec<_>>()
            })
            .collect();
        let out_domain: Vec<&[usize]> = candidates.iter().map(|c| c.2.as_slice()).collect();
        let ngram = self.config.ngram();
        info!("selection in-domain corpus: {} headlines of {}", in_domain.len(), split_path("train"));
        info!(
            "selection out-of-domain corpus: {} document sentences of {}",
            out_domain.len(),
            split_path("train")
        );
        let lm_in = NGramLm::train(&in_domain, ngram.order, ngram.discount, &data.dec)?;
        let lm_out = NGramLm::train(&out_domain, ngram.order, ngram.discount, &data.dec)?;
        let scored = score_sentences(candidates, &lm_in, &lm_out)?;
        let valid = data.headlines(&data.valid);
        let sel = select_cutoff(&scored, &valid, &self.config.cutoff_grid, &data.dec, ngram)?;

        let mut report = String::from("rank\tscore\tdoc\tsentence\tretained\ttext\n");
        for (rank, &i) in ranking(&scored).iter().enumerate() {
            let s = &scored[i];
            let text = data.train[s.doc].sentences().nth(s.sentence).expect("sentence exists").join(" ");
            let _ = writeln!(
                report,
                "{rank}\t{}\t{}\t{}\t{}\t{text}",
                s.score, s.doc, s.sentence, sel.retained[i] as u8
            );
        }
        let mut cutoffs = String::from("fraction\tvalid_ppl\tchosen\n");
        for &(f, ppl) in &sel.per_cutoff {
            let _ = writeln!(cutoffs, "{f}\t{ppl}\t{}", (f == sel.fraction) as u8);
        }
        let mut kept: Vec<(usize, usize)> = scored
            .iter()
            .zip(&sel.retained)
            .filter(|(_, &r)| r)
            .map(|(s, _)| (s.doc, s.sentence))
            .collect();
        kept.sort_unstable();
        let retained: String = kept.iter().map(|(d, k)| format!("{d}\t{k}\n")).collect();
        write_file(&self.path(SELECTION_REPORT), &report)?;
        write_file(&self.path(SELECTION_CUTOFFS), &cutoffs)?;
        write_file(&self.path(SELECTION_RETAINED), &retained)?;
        info!(
            "selection kept fraction {} ({} of {} sentences)",
            sel.fraction,
            sel.retained_count(),
            scored.len()
        );
        let train_file = split_path("train");
        let valid_file = split_path("valid");
        let mut rec = StageRecord::default();
        rec.notes.insert("in_domain".into(), format!("{train_file} headlines"));
        rec.notes.insert("out_domain".into(), format!("{train_file} document sentences"));
        rec.notes.insert("validation".into(), format!("{valid_file} headlines"));
        rec.notes.insert("fraction".into(), sel.fraction.to_string());
        self.record(
            "select",
            &[&train_file, &valid_file, DEC_VOCAB],
            &[SELECTION_REPORT, SELECTION_CUTOFFS, SELECTION_RETAINED],
            rec,
        )?;
        Ok(sel)
    }

    /// Retained sentence indices per training document.
    pub fn load_retained(&self, num_docs: usize) -> Result<Vec<Vec<usize>>> {
        self.require("select", SELECTION_RETAINED)?;
        let path = self.path(SELECTION_RETAINED);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = vec![Vec::new(); num_docs];
        for (i, line) in text.lines().enumerate() {
            let fail = || Error::Format {
                path: path.clone(),
                line: i + 1,
                message: format!("expected `doc<TAB>sentence`, got `{line}`"),
            };
            let (d, k) = line.split_once('\t').ok_or_else(fail)?;
            let d: usize = d.parse().map_err(|_| fail())?;
            let k: usize = k.parse().map_err(|_| fail())?;
            out.get_mut(d).ok_or_else(fail)?.push(k);
        }
        Ok(out)
    }

    fn write_log(&self, rel: &str, log: &TrainLog) -> Result<()> {
        write_file(&self.path(rel), &log.to_tsv())
    }

    /// Forward and backward encoder language models on all training
    /// document sentences.
    pub fn cmd_pretrain_encoder(&self) -> Result<(TrainLog, TrainLog)> {
        let data = self.load_dataset()?;
        let train = Dataset::sentences(&data.train, &data.enc);
        let valid = Dataset::sentences(&data.valid, &data.enc);
        let pre = pretrain_encoder(&train, &valid, &data.dims(&self.config), &self.config.train_config())?;
        let store = pre.encoder_store()?;
        self.save_checkpoint(ENCODER_CKPT, &store)?;
        self.write_log("logs/encoder-fwd.tsv", &pre.forward_log)?;
        self.write_log("logs/encoder-bwd.tsv", &pre.backward_log)?;
        let train_file = split_path("train");
        let valid_file = split_path("valid");
        self.record(
            "pretrain-encoder",
            &[&train_file, &valid_file, ENC_VOCAB],
            &[ENCODER_CKPT, "logs/encoder-fwd.tsv", "logs/encoder-bwd.tsv"],
            StageRecord::default(),
        )?;
        Ok((pre.forward_log, pre.backward_log))
    }

    /// Decoder language model on the selected sentences, initialized with
    /// the encoder embeddings of shared words.
    pub fn cmd_pretrain_decoder(&self) -> Result<TrainLog> {
        let data = self.load_dataset()?;
        self.require("pretrain-encoder", ENCODER_CKPT)?;
        let retained = self.load_retained(data.train.len())?;
        let enc_store = self.load_checkpoint(&self.path(ENCODER_CKPT), Some(&[ENC_EMBED]))?;
        let embed = enc_store.by_name(&format!("{ENC_EMBED}/E"))?;
        let selected: Vec<Vec<usize>> = data
            .train
            .iter()
            .zip(&retained)
            .flat_map(|(p, keep)| {
                p.sentences()
                    .enumerate()
                    .filter(|(k, _)| keep.contains(k))
                    .map(|(_, s)| data.dec.encode(s))
                    .collect::<Vec<_>>()
            })
            .collect();
        let valid = data.headlines(&data.valid);
        let (store, log) = pretrain_decoder(
            &selected,
            &valid,
            &data.enc,
            embed,
            &data.dec,
            &data.dims(&self.config),
            &self.config.train_config(),
        )?;
        self.save_checkpoint(DECODER_CKPT, &store)?;
        self.write_log("logs/decoder.tsv", &log)?;
        self.record(
            "pretrain-decoder",
            &[ENCODER_CKPT, SELECTION_RETAINED, &split_path("valid")],
            &[DECODER_CKPT, "logs/decoder.tsv"],
            StageRecord::default(),
        )?;
        Ok(log)
    }

    fn checkpoints_for(&self, sources: &[(Source, Vec<&'static str>)]) -> Result<(Checkpoints, Vec<String>)> {
        let mut ck = Checkpoints::default();
        let mut inputs = Vec::new();
        for (source, groups) in sources {
            let (stage, rel) = match source {
                Source::EncoderLm => ("pretrain-encoder".to_string(), ENCODER_CKPT.to_string()),
                Source::DecoderLm => ("pretrain-decoder".to_string(), DECODER_CKPT.to_string()),
                Source::Distant => (
                    distant_stage(DistantMode::Connections),
                    distant_ckpt(DistantMode::Connections),
                ),
                Source::DistantAll => (distant_stage(DistantMode::All), distant_ckpt(DistantMode::All)),
            };
            self.require(&stage, &rel)?;
            let store = self.load_checkpoint(&self.path(&rel), Some(groups))?;
            match source {
                Source::EncoderLm => ck.encoder = Some(store),
                Source::DecoderLm => ck.decoder = Some(store),
                Source::Distant => ck.distant = Some(store),
                Source::DistantAll => ck.distant_all = Some(store),
            }
            inputs.push(rel);
        }
        Ok((ck, inputs))
    }

    /// Distant supervision on pseudo pairs built from retained early
    /// sentences. `Connections` starts from both language models and trains
    /// only the connecting groups; `All` starts from scratch.
    pub fn cmd_pretrain_distant(&self, mode: DistantMode) -> Result<TrainLog> {
        let data = self.load_dataset()?;
        let retained = self.load_retained(data.train.len())?;
        let dims = data.dims(&self.config);
        let (store, mut inputs) = match mode {
            DistantMode::Connections => {
                let (ck, inputs) = self.checkpoints_for(&[
                    (Source::EncoderLm, ENCODER_GROUPS.to_vec()),
                    (Source::DecoderLm, DECODER_LM_GROUPS.to_vec()),
                ])?;
                (init_from_regime(Regime::EncDec, &ck, &dims, self.config.seed)?, inputs)
            }
            DistantMode::All => (
                init_from_regime(Regime::NoPretraining, &Checkpoints::default(), &dims, self.config.seed)?,
                Vec::new(),
            ),
        };
        let pseudo: Vec<HeadlinePair> = data
            .train
            .iter()
            .zip(&retained)
            .flat_map(|(p, keep)| make_pseudo_pairs(p, keep, self.config.window))
            .map(|p| p.encode(&data.enc, &data.dec))
            .collect();
        info!("distant supervision ({mode}): {} pseudo pairs", pseudo.len());
        let valid = data.encode(&data.valid);
        let (store, log) = pretrain_distant(
            store,
            &pseudo,
            &valid,
            mode,
            &self.config.train_config(),
            self.config.max_doc_tokens,
        )?;
        let rel = distant_ckpt(mode);
        let log_rel = format!("logs/distant-{mode}.tsv");
        self.save_checkpoint(&rel, &store)?;
        self.write_log(&log_rel, &log)?;
        inputs.push(SELECTION_RETAINED.to_string());
        let ins: Vec<&str> = inputs.iter().map(String::as_str).collect();
        let mut rec = StageRecord::default();
        rec.notes.insert("pseudo_pairs".into(), pseudo.len().to_string());
        self.record(&distant_stage(mode), &ins, &[&rel, &log_rel], rec)?;
        Ok(log)
    }

    /// Initializes the model per `regime`, trains it on the training split
    /// and keeps the parameters of the best validation epoch.
    pub fn cmd_train(&self, regime: Regime) -> Result<TrainOutcome> {
        let data = self.load_dataset()?;
        let mut by_source: BTreeMap<usize, (Source, Vec<&'static str>)> = BTreeMap::new();
        for (g, s) in regime.loaded_groups() {
            let key = regime.required_sources().iter().position(|x| *x == s).expect("source listed");
            by_source.entry(key).or_insert((s, Vec::new())).1.push(g);
        }
        let sources: Vec<(Source, Vec<&'static str>)> = by_source.into_values().collect();
        let (ck, inputs) = self.checkpoints_for(&sources)?;
        let store = init_from_regime(regime, &ck, &data.dims(&self.config), self.config.seed)?;
        let (store, log) = train_nhg(
            store,
            &data.encode(&data.train),
            &data.encode(&data.valid),
            &self.config.train_config(),
            self.config.max_doc_tokens,
        )?;
        let rel = model_ckpt(regime);
        let log_rel = format!("logs/train-{regime}.tsv");
        self.save_checkpoint(&rel, &store)?;
        self.write_log(&log_rel, &log)?;
        let loaded_groups: Vec<String> = regime.loaded_groups().iter().map(|(g, _)| g.to_string()).collect();
        let rec = StageRecord {
            regime: Some(regime.to_string()),
            loaded_groups: loaded_groups.clone(),
            ..StageRecord::default()
        };
        let mut ins: Vec<&str> = inputs.iter().map(String::as_str).collect();
        let train_file = split_path("train");
        ins.push(&train_file);
        self.record(&train_stage(regime), &ins, &[&rel, &log_rel], rec)?;
        Ok(TrainOutcome {
            log,
            loaded_groups,
            checkpoint: self.path(&rel),
        })
    }

    fn resolve_model(&self, model: &ModelRef) -> Result<ParamStore> {
        let path = match model {
            ModelRef::Regime(r) => {
                let rel = model_ckpt(*r);
                self.require(&train_stage(*r), &rel)?;
                self.path(&rel)
            }
            ModelRef::Path(p) => p.clone(),
        };
        let store = self.load_checkpoint(&path, Some(&NHG_GROUPS))?;
        Ok(store)
    }

    /// Test-set perplexity, ROUGE and optional significance against a
    /// baseline report. Writes `reports/<name>.txt` and the generated
    /// headlines next to it.
    pub fn cmd_eval(&self, model: &ModelRef, baseline: Option<&Path>) -> Result<(EvalReport, PathBuf)> {
        let data = self.load_dataset()?;
        let store = self.resolve_model(model)?;
        let base = baseline.map(EvalReport::load).transpose()?;
        if let (Some(b), Some(path)) = (&base, baseline) {
            if b.docs.len() != data.test.len() {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    line: 0,
                    message: format!(
                        "baseline covers {} documents, the test split has {}",
                        b.docs.len(),
                        data.test.len()
                    ),
                });
            }
        }
        let (report, headlines) = evaluate_system(
            &store,
            &data.test,
            &data.enc,
            &data.dec,
            &self.config.eval_config(),
            base.as_ref(),
        )?;
        let name = model.name();
        let rel = format!("reports/{name}.txt");
        let path = self.path(&rel);
        write_file(&path, &report.to_text())?;
        let text: String = headlines.iter().map(|h| h.join(" ") + "\n").collect();
        write_file(&self.path(&format!("reports/{name}.headlines")), &text)?;
        Ok((report, path))
    }

    /// One headline per line of `documents` (raw text, one document per line).
    pub fn cmd_generate(&self, model: &ModelRef, documents: &Path, output: Option<&Path>) -> Result<PathBuf> {
        let data_enc = {
            self.require("preprocess", ENC_VOCAB)?;
            Vocabulary::load(&self.path(ENC_VOCAB))?
        };
        let dec = Vocabulary::load(&self.path(DEC_VOCAB))?;
        let store = self.resolve_model(model)?;
        let rules = BoilerplateRules::new(DEFAULT_BOILERPLATE)?;
        let text = std::fs::read_to_string(documents).map_err(|e| Error::io(documents, e))?;
        let docs: Vec<Vec<usize>> = text
            .lines()
            .enumerate()
            .map(|(i, line)| {
                let ids = data_enc.encode(&preprocess_en(line, &rules));
                if ids.is_empty() {
                    return Err(Error::Format {
                        path: documents.to_path_buf(),
                        line: i + 1,
                        message: "empty document".into(),
                    });
                }
                Ok(ids)
            })
            .collect::<Result<_>>()?;
        let headlines = generate_headlines(&store, &docs, &dec, &self.config.eval_config())?;
        let out = match output {
            Some(p) => p.to_path_buf(),
            None => self.path(&format!("headlines/{}.txt", model.name())),
        };
        let text: String = headlines.iter().map(|h| h.join(" ") + "\n").collect();
        write_file(&out, &text)?;
        Ok(out)
    }
}

/// Groups a regime copies, by name, for checks against source checkpoints.
pub fn regime_group_names(regime: Regime) -> Vec<&'static str> {
    regime.loaded_groups().into_iter().map(|(g, _)| g).collect()
}
