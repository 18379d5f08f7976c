use std::path::{Path, PathBuf};

use nhg::checkpoint;
use nhg::corpus::{read_pairs, write_pairs, Vocabulary, BOS, EOS, PAD};
use nhg::model::*;
use nhg::pipeline::*;
use nhg::synthetic::{news_corpus, NewsConfig};
use nhg::Error;

fn small_config() -> Config {
    let mut c = Config::default();
    for (k, v) in [
        ("hidden", "8"),
        ("embed", "8"),
        ("batch_size", "16"),
        ("max_epochs", "2"),
        ("adam_alpha", "0.01"),
        ("resamples", "200"),
        ("max_len", "8"),
    ] {
        c.set(k, v).unwrap();
    }
    c
}

fn write_input(dir: &Path, pairs: usize) -> PathBuf {
    let input = dir.join("input");
    std::fs::create_dir_all(&input).unwrap();
    let all = news_corpus(&NewsConfig {
        pairs,
        nouns: 10,
        verbs: 4,
        places: 4,
        ..NewsConfig::default()
    })
    .unwrap();
    let (nt, nv) = (pairs * 8 / 10, pairs / 10);
    write_pairs(&input.join("train.jsonl"), &all[..nt]).unwrap();
    write_pairs(&input.join("valid.jsonl"), &all[nt..nt + nv]).unwrap();
    write_pairs(&input.join("test.jsonl"), &all[nt + nv..]).unwrap();
    input
}

fn setup(cfg: Config, pairs: usize) -> (tempfile::TempDir, Workspace, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), pairs);
    let ws = Workspace::new(dir.path().join("out"), cfg).unwrap();
    (dir, ws, input)
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

/// Greedy decoding built from the value-level model functions.
fn greedy(store: &nhg::store::ParamStore, doc: &[usize], max_len: usize) -> Vec<usize> {
    let ann = encode_values(store, doc).unwrap();
    let mut s = init_decoder_state_values(store, &ann).unwrap();
    let mut prev = BOS;
    let mut out = Vec::new();
    for _ in 0..max_len {
        let (ctx, _) = attend_values(store, &s, &ann).unwrap();
        let (next, logits) = decode_step_values(store, prev, &s, &ctx).unwrap();
        let best = (0..logits.len())
            .filter(|&w| w != PAD && w != BOS)
            .fold(None, |b: Option<usize>, w| match b {
                Some(b) if logits[b] >= logits[w] => Some(b),
                _ => Some(w),
            })
            .unwrap();
        if best == EOS {
            break;
        }
        out.push(best);
        prev = best;
        s = next;
    }
    out
}

#[test]
fn preprocess_is_idempotent_and_keeps_split_sizes() {
    let (_d, ws, input) = setup(small_config(), 60);
    let s = ws.cmd_preprocess(&input).unwrap();
    let files: Vec<PathBuf> = SPLITS
        .iter()
        .map(|sp| ws.path(&split_path(sp)))
        .chain([ws.path(ENC_VOCAB), ws.path(DEC_VOCAB)])
        .collect();
    let first: Vec<Vec<u8>> = files.iter().map(|f| read(f)).collect();
    assert_eq!(ws.cmd_preprocess(&input).unwrap(), s);
    let second: Vec<Vec<u8>> = files.iter().map(|f| read(f)).collect();
    assert_eq!(first, second);
    for (i, sp) in SPLITS.iter().enumerate() {
        let n_in = read_pairs(&input.join(format!("{sp}.jsonl"))).unwrap().len();
        assert_eq!(s.counts[i], n_in);
        assert_eq!(read_pairs(&ws.path(&split_path(sp))).unwrap().len(), n_in);
    }
    for rel in [ENC_VOCAB, DEC_VOCAB] {
        let v = Vocabulary::load(&ws.path(rel)).unwrap();
        assert!(v.len() - 4 <= 50000);
        assert!(v.regular().all(|(id, _)| v.count(id).unwrap() >= 3));
    }
}

#[test]
fn missing_input_split_is_named() {
    let (_d, ws, input) = setup(small_config(), 30);
    std::fs::remove_file(input.join("valid.jsonl")).unwrap();
    let e = ws.cmd_preprocess(&input).unwrap_err();
    assert!(matches!(e, Error::MissingArtifact { .. }));
    assert!(e.to_string().contains("valid.jsonl"), "{e}");
}

#[test]
fn full_chain() {
    let (_d, ws, input) = setup(small_config(), 60);
    ws.cmd_preprocess(&input).unwrap();

    // Selection: provenance of the corpora and an ascending report.
    let sel = ws.cmd_select().unwrap();
    let rec = ws.manifest().unwrap().stages["select"].clone();
    assert_eq!(rec.notes["in_domain"], "data/train.jsonl headlines");
    assert_eq!(rec.notes["out_domain"], "data/train.jsonl document sentences");
    let report = std::fs::read_to_string(ws.path(SELECTION_REPORT)).unwrap();
    let scores: Vec<f64> = report.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(scores.len(), sel.retained.len());
    assert!(scores.windows(2).all(|w| w[0] <= w[1]));

    // Distant connections needs both language models.
    let e = ws.cmd_pretrain_distant(DistantMode::Connections).unwrap_err();
    assert!(e.to_string().contains("encoder.ckpt"), "{e}");

    ws.cmd_pretrain_encoder().unwrap();
    let enc = checkpoint::load(&ws.path(ENCODER_CKPT)).unwrap();
    assert_eq!(enc.store.groups(), ENCODER_GROUPS.map(String::from).to_vec());
    let bytes = read(&ws.path(ENCODER_CKPT));
    ws.cmd_pretrain_encoder().unwrap();
    assert_eq!(read(&ws.path(ENCODER_CKPT)), bytes);

    ws.cmd_pretrain_decoder().unwrap();
    let dec = checkpoint::load(&ws.path(DECODER_CKPT)).unwrap();
    assert_eq!(dec.store.groups(), DECODER_LM_GROUPS.map(String::from).to_vec());
    ws.cmd_pretrain_distant(DistantMode::Connections).unwrap();

    for regime in [Regime::NoPretraining, Regime::EncDecDist] {
        let out = ws.cmd_train(regime).unwrap();
        let rec = ws.manifest().unwrap().stages[&format!("train-{regime}")].clone();
        let declared: Vec<String> = regime_group_names(regime).iter().map(|g| g.to_string()).collect();
        assert_eq!(rec.loaded_groups, declared);
        assert_eq!(out.loaded_groups, declared);
        let log = std::fs::read_to_string(ws.path(&format!("logs/train-{regime}.tsv"))).unwrap();
        assert_eq!(log.lines().count(), out.log.records.len());
    }

    // Evaluation: perplexity recomputed directly, CI half-width present,
    // and no significant difference against itself.
    let model = ModelRef::Regime(Regime::NoPretraining);
    let (rep, path) = ws.cmd_eval(&model, None).unwrap();
    let data = ws.load_dataset().unwrap();
    let store = checkpoint::load(&ws.path(&model_ckpt(Regime::NoPretraining))).unwrap().store;
    let direct = nhg_perplexity(&store, &data.encode(&data.test), ws.config.max_doc_tokens).unwrap();
    assert!((rep.ppl - direct.ppl).abs() < 1e-9);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("PPL_CI_halfwidth\t"));
    let own = ws.path("own-baseline.txt");
    std::fs::copy(&path, &own).unwrap();
    let (vs_self, _) = ws.cmd_eval(&model, Some(&own)).unwrap();
    assert_eq!(vs_self.comparisons.len(), 4);
    assert!(vs_self.comparisons.iter().all(|c| !c.significant));

    // Generation: one line per document, greedy at beam 1, reproducible.
    let docs = ws.path("docs.txt");
    let raw = read_pairs(&input.join("test.jsonl")).unwrap();
    let lines: String = raw.iter().map(|p| p.document.clone() + "\n").collect();
    std::fs::write(&docs, lines).unwrap();
    let mut greedy_cfg = ws.config.clone();
    greedy_cfg.beam = 1;
    let ws1 = Workspace::new(ws.out_dir.clone(), greedy_cfg).unwrap();
    let out1 = ws1.cmd_generate(&model, &docs, Some(&ws.path("g1.txt"))).unwrap();
    let generated = std::fs::read_to_string(&out1).unwrap();
    assert_eq!(generated.lines().count(), raw.len());
    for (line, pair) in generated.lines().zip(&data.test) {
        let ids = data.enc.encode(&pair.document);
        let expect = data.dec.decode(&greedy(&store, &ids, ws.config.max_len)).join(" ");
        assert_eq!(line, expect);
    }
    let out2 = ws1.cmd_generate(&model, &docs, Some(&ws.path("g2.txt"))).unwrap();
    assert_eq!(read(&out1), read(&out2));
}

#[test]
fn no_pretraining_needs_no_checkpoints_and_stale_config_is_rejected() {
    let mut cfg = small_config();
    cfg.max_epochs = 1;
    let (_d, ws, input) = setup(cfg.clone(), 40);
    ws.cmd_preprocess(&input).unwrap();
    let out = ws.cmd_train(Regime::NoPretraining).unwrap();
    assert_eq!(out.log.records.len(), 1);
    assert!(out.loaded_groups.is_empty());
    let e = ws.cmd_train(Regime::Encoder).unwrap_err();
    assert!(e.to_string().contains("encoder.ckpt"), "{e}");

    cfg.seed = 9;
    let other = Workspace::new(ws.out_dir.clone(), cfg).unwrap();
    assert!(matches!(other.cmd_train(Regime::NoPretraining), Err(Error::StaleArtifact { .. })));

    // Tampering with a recorded output is detected.
    std::fs::write(ws.path(ENC_VOCAB), "garbage").unwrap();
    assert!(matches!(ws.load_dataset(), Err(Error::StaleArtifact { .. })));
}

#[test]
fn full_fraction_grid_keeps_everything() {
    let mut cfg = small_config();
    cfg.set("cutoff_grid", "1").unwrap();
    let (_d, ws, input) = setup(cfg, 40);
    ws.cmd_preprocess(&input).unwrap();
    let sel = ws.cmd_select().unwrap();
    assert_eq!(sel.fraction, 1.0);
    assert!(sel.retained.iter().all(|&r| r));
}
