use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Token/id mapping. Ids `0..4` are the special tokens; regular tokens follow
/// in decreasing frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut counts = vec![0; SPECIALS.len()];
        let mut index: HashMap<String, usize> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        for (tok, count) in entries {
            if index.contains_key(&tok) {
                return Err(Error::invalid(format!("duplicate vocabulary token `{tok}`")));
            }
            index.insert(tok.clone(), tokens.len());
            tokens.push(tok);
            counts.push(count);
        }
        Ok(Vocabulary {
            tokens,
            counts,
            index,
        })
    }

    /// Keeps the `max_size` most frequent tokens seen at least `min_count`
    /// times; ties go to the token seen first.
    pub fn build<'a, I, S>(streams: I, max_size: usize, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        if max_size == 0 || min_count == 0 {
            return Err(Error::invalid("vocabulary max_size and min_count must be at least 1"));
        }
        let mut order: Vec<String> = Vec::new();
        let mut counts: HashMap<String, u64> = HashMap::new();
        for stream in streams {
            for tok in stream {
                let tok = tok.as_ref();
                if SPECIALS.contains(&tok) {
                    continue;
                }
                match counts.get_mut(tok) {
                    Some(c) => *c += 1,
                    None => {
                        counts.insert(tok.to_string(), 1);
                        order.push(tok.to_string());
                    }
                }
            }
        }
        let mut kept: Vec<(usize, String, u64)> = order
            .into_iter()
            .enumerate()
            .filter_map(|(first, tok)| {
                let c = counts[&tok];
                (c >= min_count).then_some((first, tok, c))
            })
            .collect();
        kept.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
        kept.truncate(max_size);
        Self::from_entries(kept.into_iter().map(|(_, t, c)| (t, c)).collect())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of regular (non-special) tokens.
    pub fn regular_len(&self) -> usize {
        self.tokens.len() - SPECIALS.len()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> Option<u64> {
        self.counts.get(id).copied()
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(SPECIALS[UNK]).to_string())
            .collect()
    }

    /// Regular tokens with their ids.
    pub fn regular(&self) -> impl Iterator<Item = (usize, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .skip(SPECIALS.len())
            .map(|(i, t)| (i, t.as_str()))
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for s in SPECIALS {
            out.push_str(s);
            out.push('\n');
        }
        for (i, tok) in self.regular() {
            writeln!(out, "{tok}\t{}", self.counts[i]).unwrap();
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let fmt = |line: usize, message: String| Error::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines();
        for (i, special) in SPECIALS.iter().enumerate() {
            match lines.next() {
                Some(l) if l.split('\t').next() == Some(*special) => {}
                other => {
                    return Err(fmt(
                        i + 1,
                        format!("expected special token `{special}`, found {other:?}"),
                    ))
                }
            }
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + SPECIALS.len() + 1;
            if line.is_empty() {
                continue;
            }
            let (tok, count) = line
                .split_once('\t')
                .ok_or_else(|| fmt(lineno, "expected `token<TAB>count`".into()))?;
            let count = count
                .parse()
                .map_err(|e| fmt(lineno, format!("bad count `{count}`: {e}")))?;
            entries.push((tok.to_string(), count));
        }
        Self::from_entries(entries).map_err(|e| fmt(0, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}
