use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::beam::beam_search;
use super::rouge::{rouge_l, rouge_n, RougeScore};
use super::significance::significance_test;
use crate::corpus::{HeadlinePair, TokenizedPair, Vocabulary};
use crate::error::{Error, Result};
use crate::lm::ppl_confidence_interval;
use crate::model::nhg_perplexity;
use crate::store::ParamStore;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub beam: usize,
    pub max_len: usize,
    pub max_doc_tokens: usize,
    /// Confidence level of the perplexity interval and the significance tests.
    pub level: f64,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            beam: 5,
            max_len: 30,
            max_doc_tokens: 400,
            level: 0.95,
            resamples: 1000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DocScores {
    pub r1: RougeScore,
    pub rl: RougeScore,
}

impl DocScores {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::R1Recall => self.r1.recall,
            Metric::R1Precision => self.r1.precision,
            Metric::RlRecall => self.rl.recall,
            Metric::RlPrecision => self.rl.precision,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    R1Recall,
    R1Precision,
    RlRecall,
    RlPrecision,
}

pub const METRICS: [Metric; 4] = [Metric::R1Recall, Metric::R1Precision, Metric::RlRecall, Metric::RlPrecision];

impl Metric {
    pub fn key(self) -> &'static str {
        match self {
            Metric::R1Recall => "R1_R",
            Metric::R1Precision => "R1_P",
            Metric::RlRecall => "RL_R",
            Metric::RlPrecision => "RL_P",
        }
    }

    fn from_key(k: &str) -> Option<Metric> {
        METRICS.iter().copied().find(|m| m.key() == k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub metric: Metric,
    pub significant: bool,
    pub p_greater: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ppl: f64,
    pub ppl_low: f64,
    pub ppl_high: f64,
    /// Macro averages over documents.
    pub r1: RougeScore,
    pub rl: RougeScore,
    pub docs: Vec<DocScores>,
    /// Present when evaluated against a baseline, in [`METRICS`] order.
    pub comparisons: Vec<Comparison>,
}

impl EvalReport {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::R1Recall => self.r1.recall,
            Metric::R1Precision => self.r1.precision,
            Metric::RlRecall => self.rl.recall,
            Metric::RlPrecision => self.rl.precision,
        }
    }

    /// Tab-separated `KEY value` lines; floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: f64| {
            let _ = writeln!(out, "{k}\t{v}");
        };
        kv("PPL", self.ppl);
        kv("PPL_CI_low", self.ppl_low);
        kv("PPL_CI_high", self.ppl_high);
        kv("PPL_CI_halfwidth", (self.ppl_high - self.ppl_low) / 2.0);
        for m in METRICS {
            kv(m.key(), self.metric(m));
        }
        for c in &self.comparisons {
            let _ = writeln!(out, "SIG_{}\t{}\t{}", c.metric.key(), c.significant, c.p_greater);
        }
        for (i, d) in self.docs.iter().enumerate() {
            let _ = writeln!(
                out,
                "DOC\t{i}\t{}\t{}\t{}\t{}",
                d.r1.recall, d.r1.precision, d.rl.recall, d.rl.precision
            );
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let fail = |line: usize, message: String| Error::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut scalars: Vec<(String, f64)> = Vec::new();
        let mut docs = Vec::new();
        let mut comparisons = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| fail(ln, format!("bad number `{s}`")));
            match fields[0] {
                "DOC" => {
                    if fields.len() != 6 || fields[1] != docs.len().to_string() {
                        return Err(fail(ln, "malformed DOC line".into()));
                    }
                    docs.push(DocScores {
                        r1: RougeScore {
                            recall: num(fields[2])?,
                            precision: num(fields[3])?,
                        },
                        rl: RougeScore {
                            recall: num(fields[4])?,
                            precision: num(fields[5])?,
                        },
                    });
                }
                k if k.starts_with("SIG_") => {
                    let metric = Metric::from_key(&k[4..]).ok_or_else(|| fail(ln, format!("unknown metric `{k}`")))?;
                    if fields.len() != 3 {
                        return Err(fail(ln, "malformed SIG line".into()));
                    }
                    let significant = fields[1]
                        .parse::<bool>()
                        .map_err(|_| fail(ln, format!("bad flag `{}`", fields[1])))?;
                    comparisons.push(Comparison {
                        metric,
                        significant,
                        p_greater: num(fields[2])?,
                    });
                }
                k => {
                    if fields.len() != 2 {
                        return Err(fail(ln, format!("expected `KEY<TAB>value` for {k}")));
                    }
                    scalars.push((k.to_string(), num(fields[1])?));
                }
            }
        }
        let get = |k: &str| {
            scalars
                .iter()
                .find(|(n, _)| n == k)
                .map(|(_, v)| *v)
                .ok_or_else(|| fail(0, format!("missing field {k}")))
        };
        Ok(EvalReport {
            ppl: get("PPL")?,
            ppl_low: get("PPL_CI_low")?,
            ppl_high: get("PPL_CI_high")?,
            r1: RougeScore {
                recall: get("R1_R")?,
                precision: get("R1_P")?,
            },
            rl: RougeScore {
                recall: get("RL_R")?,
                precision: get("RL_P")?,
            },
            docs,
            comparisons,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Beam-search headlines for every document, in input order.
pub fn generate_headlines(
    store: &ParamStore,
    documents: &[Vec<usize>],
    dec_vocab: &Vocabulary,
    cfg: &EvalConfig,
) -> Result<Vec<Vec<String>>> {
    documents
        .par_iter()
        .map(|d| {
            let n = d.len().min(cfg.max_doc_tokens);
            let h = beam_search(store, &d[..n], cfg.beam, cfg.max_len)?;
            Ok(dec_vocab.decode(&h.tokens))
        })
        .collect()
}

pub fn score_documents(candidates: &[Vec<String>], references: &[Vec<String>]) -> Result<Vec<DocScores>> {
    if candidates.len() != references.len() {
        return Err(Error::Dimension {
            context: "generated headlines",
            expected: references.len(),
            actual: candidates.len(),
        });
    }
    candidates
        .iter()
        .zip(references)
        .map(|(c, r)| {
            Ok(DocScores {
                r1: rouge_n(c, r, 1)?,
                rl: rouge_l(c, r),
            })
        })
        .collect()
}

/// Significance of each metric against a baseline evaluated on the same documents.
pub fn compare(docs: &[DocScores], baseline: &[DocScores], cfg: &EvalConfig) -> Result<Vec<Comparison>> {
    if docs.len() != baseline.len() {
        return Err(Error::Dimension {
            context: "baseline documents",
            expected: docs.len(),
            actual: baseline.len(),
        });
    }
    METRICS
        .iter()
        .map(|&m| {
            let a: Vec<f64> = docs.iter().map(|d| d.metric(m)).collect();
            let b: Vec<f64> = baseline.iter().map(|d| d.metric(m)).collect();
            let s = significance_test(&a, &b, cfg.level, cfg.resamples, cfg.seed)?;
            Ok(Comparison {
                metric: m,
                significant: s.significant,
                p_greater: s.p_greater,
            })
        })
        .collect()
}

fn macro_average(docs: &[DocScores]) -> (RougeScore, RougeScore) {
    let n = docs.len() as f64;
    let avg = |f: &dyn Fn(&DocScores) -> f64| docs.iter().map(f).sum::<f64>() / n;
    (
        RougeScore {
            recall: avg(&|d| d.r1.recall),
            precision: avg(&|d| d.r1.precision),
        },
        RougeScore {
            recall: avg(&|d| d.rl.recall),
            precision: avg(&|d| d.rl.precision),
        },
    )
}

/// Test perplexity with its confidence interval, beam-search ROUGE-1/L and
/// optional significance against a baseline. Also returns the generated
/// headlines.
pub fn evaluate_system(
    store: &ParamStore,
    pairs: &[TokenizedPair],
    enc_vocab: &Vocabulary,
    dec_vocab: &Vocabulary,
    cfg: &EvalConfig,
    baseline: Option<&EvalReport>,
) -> Result<(EvalReport, Vec<Vec<String>>)> {
    if pairs.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let encoded: Vec<HeadlinePair> = pairs.iter().map(|p| p.encode(enc_vocab, dec_vocab)).collect();
    let ppl = nhg_perplexity(store, &encoded, cfg.max_doc_tokens)?;
    let (ppl_low, ppl_high) = ppl_confidence_interval(&ppl.nlls, cfg.level)?;
    let documents: Vec<Vec<usize>> = encoded.into_iter().map(|p| p.document_ids).collect();
    let headlines = generate_headlines(store, &documents, dec_vocab, cfg)?;
    let references: Vec<Vec<String>> = pairs.iter().map(|p| p.headline.clone()).collect();
    let docs = score_documents(&headlines, &references)?;
    let comparisons = match baseline {
        Some(b) => compare(&docs, &b.docs, cfg)?,
        None => Vec::new(),
    };
    let (r1, rl) = macro_average(&docs);
    Ok((
        EvalReport {
            ppl: ppl.ppl,
            ppl_low,
            ppl_high,
            r1,
            rl,
            docs,
            comparisons,
        },
        headlines,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> EvalReport {
        EvalReport {
            ppl: 12.345678901234567,
            ppl_low: 11.0 + 1.0 / 3.0,
            ppl_high: 13.1,
            r1: RougeScore {
                recall: 0.1,
                precision: 2.0 / 7.0,
            },
            rl: RougeScore {
                recall: 0.3,
                precision: 1e-17,
            },
            docs: vec![
                DocScores::default(),
                DocScores {
                    r1: RougeScore {
                        recall: 1.0 / 3.0,
                        precision: 0.5,
                    },
                    rl: RougeScore {
                        recall: 0.25,
                        precision: 1.0,
                    },
                },
            ],
            comparisons: vec![Comparison {
                metric: Metric::RlPrecision,
                significant: true,
                p_greater: 0.987,
            }],
        }
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let r = report();
        let text = r.to_text();
        let back = EvalReport::parse(&text, Path::new("r.txt")).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_text(), text);
        assert!(text.contains("PPL_CI_halfwidth\t"));
    }

    #[test]
    fn parse_errors_name_line() {
        let err = EvalReport::parse("PPL\t1\nR1_R\tx\n", Path::new("r.txt")).unwrap_err();
        assert!(err.to_string().contains("r.txt") && err.to_string().contains('2'), "{err}");
        assert!(EvalReport::parse("PPL\t1\n", Path::new("r.txt")).is_err());
    }

    #[test]
    fn self_comparison_not_significant() {
        let r = report();
        let c = compare(&r.docs, &r.docs, &EvalConfig::default()).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|c| !c.significant));
    }
}
