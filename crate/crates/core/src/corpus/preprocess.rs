//! English preprocessing: boilerplate stripping, tokenization, lowercasing
//! and digit masking.

use regex::Regex;

use crate::error::{Error, Result};

/// Leading boilerplate commonly found in news article bodies.
pub const DEFAULT_BOILERPLATE: &[&str] = &[
    r"^\s*By \. [^.]{1,80} \. (PUBLISHED: \. [^|]{1,80}\| \. )?(UPDATED: \. [^.]{1,80}\. (\d{4} \. )?)?",
    r"^\s*(PUBLISHED|UPDATED|Last updated at)[^.]{0,80}\.\s*",
    r"^\s*[A-Z][A-Za-z .,']{0,60}\(CNN\)\s*(--|—)?\s*",
    r"^\s*\((CNN|AP|Reuters)\)\s*(--|—|-)?\s*",
    r"^\s*(EDITOR'S NOTE|Editor's note):[^.]*\.\s*",
];

/// Ordered prefix patterns removed from the start of a document before
/// tokenization. Each pattern is applied once, in order.
#[derive(Debug, Clone)]
pub struct BoilerplateRules {
    patterns: Vec<Regex>,
}

impl BoilerplateRules {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Result<Self> {
        let patterns = patterns
            .iter()
            .map(|p| {
                let p = p.as_ref();
                let anchored = if p.starts_with('^') {
                    p.to_string()
                } else {
                    format!("^(?:{p})")
                };
                Regex::new(&anchored)
                    .map_err(|e| Error::Config(format!("bad boilerplate pattern `{p}`: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(BoilerplateRules { patterns })
    }

    pub fn none() -> Self {
        BoilerplateRules {
            patterns: Vec::new(),
        }
    }

    pub fn strip<'a>(&self, text: &'a str) -> &'a str {
        let mut rest = text;
        for re in &self.patterns {
            if let Some(m) = re.find(rest) {
                rest = &rest[m.end()..];
            }
        }
        rest
    }
}

impl Default for BoilerplateRules {
    fn default() -> Self {
        Self::new(DEFAULT_BOILERPLATE).expect("default patterns compile")
    }
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '#'
}

fn is_digitlike(c: char) -> bool {
    c.is_numeric() || c == '#'
}

/// Punctuation that stays inside a token when surrounded appropriately:
/// separators between digits (`2,400`, `3.5`, `10:30`) and word-internal
/// apostrophes and hyphens (`don't`, `well-known`).
fn joins(prev: Option<char>, c: char, next: Option<char>) -> bool {
    match (prev, next) {
        (Some(p), Some(n)) => match c {
            ',' | '.' | ':' => is_digitlike(p) && is_digitlike(n),
            '\'' | '’' | '-' => is_word(p) && is_word(n),
            _ => false,
        },
        _ => false,
    }
}

/// Splits on whitespace and punctuation; every non-word character that does
/// not join two word characters becomes its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let prev = i.checked_sub(1).map(|j| chars[j]);
            let next = chars.get(i + 1).copied();
            if is_word(c) || (!current.is_empty() && joins(prev, c, next)) {
                current.push(c);
            } else {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

/// Lowercases and replaces every digit with `#`.
pub fn normalize(text: &str) -> String {
    text.chars()
        .flat_map(|c| {
            if c.is_numeric() {
                vec!['#']
            } else {
                c.to_lowercase().collect()
            }
        })
        .collect()
}

/// Full English pipeline: strip boilerplate, normalize, tokenize.
pub fn preprocess_en(text: &str, rules: &BoilerplateRules) -> Vec<String> {
    tokenize(&normalize(rules.strip(text)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn money_and_years() {
        let toks = preprocess_en("Sold for $2,400 in 2017.", &BoilerplateRules::none());
        assert_eq!(toks.join(" "), "sold for $ #,### in #### .");
    }

    #[test]
    fn empty_text() {
        assert!(preprocess_en("", &BoilerplateRules::default()).is_empty());
        assert!(preprocess_en("   \n\t", &BoilerplateRules::default()).is_empty());
    }

    #[test]
    fn cnn_prefix_removed() {
        let rules = BoilerplateRules::default();
        let body = "A democratic congressman is at the head of a group.";
        let with_prefix = format!("(CNN) -- {body}");
        assert_eq!(preprocess_en(&with_prefix, &rules), preprocess_en(body, &rules));
        let dateline = format!("WASHINGTON (CNN) -- {body}");
        assert_eq!(preprocess_en(&dateline, &rules), preprocess_en(body, &rules));
    }

    #[test]
    fn custom_rules_apply_in_order() {
        let rules = BoilerplateRules::new(&["Breaking:\\s*", "Update:\\s*"]).unwrap();
        assert_eq!(rules.strip("Breaking: Update: text"), "text");
        assert_eq!(rules.strip("Update: Breaking: text"), "Breaking: text");
        assert!(BoilerplateRules::new(&["("]).is_err());
    }

    #[test]
    fn apostrophes_and_hyphens_stay_inside_words() {
        let toks = preprocess_en("It's a well-known 'fact' -- isn't it?", &BoilerplateRules::none());
        assert_eq!(
            toks,
            ["it's", "a", "well-known", "'", "fact", "'", "-", "-", "isn't", "it", "?"]
        );
    }

    proptest! {
        #[test]
        fn tokenization_is_idempotent(text in "[ a-zA-Z0-9$,.!?'()#:-]{0,60}") {
            let once = preprocess_en(&text, &BoilerplateRules::none());
            let again = preprocess_en(&once.join(" "), &BoilerplateRules::none());
            prop_assert_eq!(once, again);
        }
    }
}
