/// Tokens (already lowercased) that end with a period without ending a sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "gen", "sen", "rep", "gov", "lt",
    "col", "sgt", "capt", "rev", "inc", "co", "corp", "ltd", "no", "jan", "feb", "aug", "sept",
    "oct", "nov", "dec", "u.s", "u.k",
];

fn is_terminal(token: &str) -> bool {
    matches!(token, "." | "!" | "?")
}

fn is_trailing(token: &str) -> bool {
    is_terminal(token) || matches!(token, "\"" | "'" | ")" | "''")
}

/// Rule-based sentence splitter over a token sequence.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: Vec<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::new(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SentenceSplitter {
    pub fn new<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SentenceSplitter {
            abbreviations: abbreviations.into_iter().map(Into::into).collect(),
        }
    }

    /// Offsets where sentences start. The first is always 0 for non-empty
    /// input; an empty input has no sentences.
    pub fn split<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let mut starts = vec![0];
        let mut i = 0;
        while i < tokens.len() {
            let tok = tokens[i].as_ref();
            let abbreviation = tok == "."
                && i > 0
                && self.abbreviations.iter().any(|a| a == tokens[i - 1].as_ref());
            if is_terminal(tok) && !abbreviation {
                let mut end = i + 1;
                while end < tokens.len() && is_trailing(tokens[end].as_ref()) {
                    end += 1;
                }
                if end < tokens.len() {
                    starts.push(end);
                }
                i = end;
            } else {
                i += 1;
            }
        }
        starts
    }
}

/// `[start, end)` token ranges for each sentence.
pub fn sentence_spans(starts: &[usize], len: usize) -> Vec<(usize, usize)> {
    starts
        .iter()
        .enumerate()
        .map(|(k, &s)| (s, starts.get(k + 1).copied().unwrap_or(len)))
        .collect()
}
