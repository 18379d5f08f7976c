use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nhg::corpus::write_pairs;
use nhg::model::{DistantMode, Regime};
use nhg::pipeline::{Config, ModelRef, Workspace};
use nhg::synthetic::{news_corpus, NewsConfig};
use nhg::{Error, Result};

/// Neural headline generation with language-model and distant-supervision
/// pre-training.
#[derive(Parser, Debug)]
#[command(name = "nhg", version)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory holding every artifact and the manifest.
    #[arg(long, global = true, default_value = "nhg-out")]
    out_dir: PathBuf,
    /// Overrides any configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Use the model trained under this regime.
    #[arg(long, conflicts_with = "checkpoint")]
    regime: Option<Regime>,
    /// Use this checkpoint file instead.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Beam size; 1 is greedy decoding.
    #[arg(long)]
    beam: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tokenize `<input>/{train,valid,test}.jsonl` and build vocabularies.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
    },
    /// Cross-entropy difference selection of document sentences.
    Select,
    /// Forward and backward encoder language models.
    PretrainEncoder,
    /// Decoder language model on the selected sentences.
    PretrainDecoder,
    /// Distant supervision on pseudo-headline pairs.
    PretrainDistant {
        #[arg(long, default_value = "connections")]
        mode: DistantMode,
    },
    /// Train the headline model under an initialization regime.
    Train {
        #[arg(long)]
        regime: Regime,
    },
    /// Generate one headline per input line.
    Generate {
        #[command(flatten)]
        model: ModelArgs,
        /// Raw documents, one per line.
        #[arg(long)]
        documents: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Test-set perplexity, ROUGE and significance against a baseline report.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Write a synthetic corpus in the `preprocess` input layout.
    Synth {
        #[arg(long, default_value_t = 2000)]
        pairs: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

fn config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn model_ref(args: &ModelArgs) -> Result<ModelRef> {
    match (&args.regime, &args.checkpoint) {
        (Some(r), None) => Ok(ModelRef::Regime(*r)),
        (None, Some(p)) => Ok(ModelRef::Path(p.clone())),
        _ => Err(Error::Config("give exactly one of --regime or --checkpoint".into())),
    }
}

fn synth(pairs: usize, seed: u64, output: &Path) -> Result<()> {
    let all = news_corpus(&NewsConfig {
        pairs,
        seed,
        ..NewsConfig::default()
    })?;
    if pairs < 10 {
        return Err(Error::Config("synth needs at least 10 pairs".into()));
    }
    std::fs::create_dir_all(output).map_err(|e| Error::Io {
        path: output.to_path_buf(),
        source: e,
    })?;
    let (nt, nv) = (pairs * 8 / 10, pairs / 10);
    write_pairs(&output.join("train.jsonl"), &all[..nt])?;
    write_pairs(&output.join("valid.jsonl"), &all[nt..nt + nv])?;
    write_pairs(&output.join("test.jsonl"), &all[nt + nv..])?;
    println!("wrote {pairs} pairs to {}", output.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = config(&cli)?;
    if let Command::Synth { pairs, output } = &cli.command {
        return synth(*pairs, cfg.seed, output);
    }
    if let Command::Generate { model, .. } | Command::Eval { model, .. } = &cli.command {
        if let Some(b) = model.beam {
            cfg.beam = b;
            cfg.validate()?;
        }
    }
    let ws = Workspace::new(&cli.out_dir, cfg)?;
    match &cli.command {
        Command::Preprocess { input } => {
            let s = ws.cmd_preprocess(input)?;
            println!(
                "train {} valid {} test {} pairs; vocabularies {} encoder, {} decoder",
                s.counts[0], s.counts[1], s.counts[2], s.enc_vocab, s.dec_vocab
            );
        }
        Command::Select => {
            let sel = ws.cmd_select()?;
            println!("kept fraction {} ({} sentences)", sel.fraction, sel.retained_count());
        }
        Command::PretrainEncoder => {
            let (f, b) = ws.cmd_pretrain_encoder()?;
            println!(
                "forward valid ppl {} (epoch {}), backward {} (epoch {})",
                f.best().valid_ppl,
                f.best_epoch,
                b.best().valid_ppl,
                b.best_epoch
            );
        }
        Command::PretrainDecoder => {
            let log = ws.cmd_pretrain_decoder()?;
            println!("valid headline ppl {} (epoch {})", log.best().valid_ppl, log.best_epoch);
        }
        Command::PretrainDistant { mode } => {
            let log = ws.cmd_pretrain_distant(*mode)?;
            println!("valid headline ppl {} (epoch {})", log.best().valid_ppl, log.best_epoch);
        }
        Command::Train { regime } => {
            let out = ws.cmd_train(*regime)?;
            print!("{}", out.log.to_tsv());
            println!("best epoch {} -> {}", out.log.best_epoch, out.checkpoint.display());
        }
        Command::Generate {
            model,
            documents,
            output,
        } => {
            let path = ws.cmd_generate(&model_ref(model)?, documents, output.as_deref())?;
            println!("{}", path.display());
        }
        Command::Eval { model, baseline } => {
            let (report, path) = ws.cmd_eval(&model_ref(model)?, baseline.as_deref())?;
            println!(
                "PPL {} ± {}  R1 {}/{}  RL {}/{}",
                report.ppl,
                (report.ppl_high - report.ppl_low) / 2.0,
                report.r1.recall,
                report.r1.precision,
                report.rl.recall,
                report.rl.precision
            );
            println!("{}", path.display());
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_format() { 3 } else { 2 })
        }
    }
}
