use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sentences::{sentence_spans, SentenceSplitter};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

/// A headline/document pair as stored on disk, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPair {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub id: String,
    pub headline: String,
    pub document: String,
}

pub fn parse_pairs(text: &str, path: &Path) -> Result<Vec<RawPair>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fmt = |message: String| Error::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let pair: RawPair = serde_json::from_str(line).map_err(|e| fmt(e.to_string()))?;
        if pair.headline.trim().is_empty() {
            return Err(fmt("empty headline".into()));
        }
        if pair.document.trim().is_empty() {
            return Err(fmt("empty document".into()));
        }
        out.push(pair);
    }
    Ok(out)
}

pub fn read_pairs(path: &Path) -> Result<Vec<RawPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(&text, path)
}

pub fn pairs_to_string(pairs: &[RawPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p).expect("pair serializes"));
        out.push('\n');
    }
    out
}

pub fn write_pairs(path: &Path, pairs: &[RawPair]) -> Result<()> {
    std::fs::write(path, pairs_to_string(pairs)).map_err(|e| Error::io(path, e))
}

/// A tokenized pair: token strings plus sentence boundaries of the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedPair {
    pub id: String,
    pub headline: Vec<String>,
    pub document: Vec<String>,
    pub sentence_starts: Vec<usize>,
}

impl TokenizedPair {
    /// Reads a pair whose texts are already preprocessed (space-joined tokens).
    pub fn from_preprocessed(raw: &RawPair, splitter: &SentenceSplitter) -> Self {
        let headline = raw.headline.split_whitespace().map(String::from).collect();
        let document: Vec<String> = raw.document.split_whitespace().map(String::from).collect();
        let sentence_starts = splitter.split(&document);
        TokenizedPair {
            id: raw.id.clone(),
            headline,
            document,
            sentence_starts,
        }
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[String]> {
        sentence_spans(&self.sentence_starts, self.document.len())
            .into_iter()
            .map(move |(s, e)| &self.document[s..e])
    }

    pub fn encode(&self, enc: &Vocabulary, dec: &Vocabulary) -> HeadlinePair {
        HeadlinePair {
            headline_ids: dec.encode(&self.headline),
            document_ids: enc.encode(&self.document),
            sentence_starts: self.sentence_starts.clone(),
        }
    }
}

/// Id-encoded pair. Headline ids index the decoder vocabulary, document ids
/// the encoder vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadlinePair {
    pub headline_ids: Vec<usize>,
    pub document_ids: Vec<usize>,
    pub sentence_starts: Vec<usize>,
}

impl HeadlinePair {
    pub fn validate(&self) -> Result<()> {
        if self.document_ids.is_empty() {
            return Ok(());
        }
        let ok = self.sentence_starts.first() == Some(&0)
            && self.sentence_starts.windows(2).all(|w| w[0] < w[1])
            && self.sentence_starts.iter().all(|&s| s < self.document_ids.len());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "sentence starts {:?} invalid for a document of {} tokens",
                self.sentence_starts,
                self.document_ids.len()
            )))
        }
    }

    pub fn sentence_spans(&self) -> Vec<(usize, usize)> {
        sentence_spans(&self.sentence_starts, self.document_ids.len())
    }

    /// Keeps the first `max_tokens` document tokens.
    pub fn truncated(&self, max_tokens: usize) -> HeadlinePair {
        let n = self.document_ids.len().min(max_tokens);
        HeadlinePair {
            headline_ids: self.headline_ids.clone(),
            document_ids: self.document_ids[..n].to_vec(),
            sentence_starts: self
                .sentence_starts
                .iter()
                .copied()
                .filter(|&s| s < n)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Vec<RawPair> {
        (0..n)
            .map(|i| RawPair {
                id: format!("doc{i}"),
                headline: format!("headline {i} with \"quotes\"\tand tab"),
                document: format!("line one of {i}.\nline two ü {}", "x".repeat(i)),
            })
            .collect()
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        let pairs = sample(100);
        write_pairs(&path, &pairs).unwrap();
        assert_eq!(read_pairs(&path).unwrap(), pairs);
    }

    #[test]
    fn missing_headline_names_line() {
        let text = "{\"headline\":\"a\",\"document\":\"b\"}\n{\"document\":\"b\"}\n";
        match parse_pairs(text, Path::new("p")) {
            Err(Error::Format { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("headline"));
            }
            other => panic!("{other:?}"),
        }
        let blank = "{\"headline\":\"  \",\"document\":\"b\"}\n";
        assert!(parse_pairs(blank, Path::new("p")).is_err());
    }

    #[test]
    fn crlf_parses_like_lf() {
        let unix = pairs_to_string(&sample(5));
        let windows = unix.replace('\n', "\r\n");
        assert_ne!(unix.as_bytes(), windows.as_bytes());
        assert_eq!(
            parse_pairs(&unix, Path::new("u")).unwrap(),
            parse_pairs(&windows, Path::new("w")).unwrap()
        );
    }

    #[test]
    fn truncation_keeps_prefix() {
        let p = HeadlinePair {
            headline_ids: vec![5],
            document_ids: (0..25).collect(),
            sentence_starts: vec![0, 8, 12, 20],
        };
        let t = p.truncated(10);
        assert_eq!(t.document_ids, (0..10).collect::<Vec<_>>());
        assert_eq!(t.sentence_starts, vec![0, 8]);
        t.validate().unwrap();
    }
}
