//! Synthetic corpora with known structure.
//!
//! [`BigramSource`] emits sentences from a sparse first-order Markov chain
//! whose per-token perplexity is known in closed form. [`news_corpus`] emits
//! headline/document pairs whose headline is a fixed compression of the
//! document's lead sentence.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::RawPair;
use crate::error::{Error, Result};
use crate::numerics::derive_rng;

const SYLLABLES: [&str; 20] = [
    "ba", "ke", "di", "mo", "lu", "sa", "te", "ri", "no", "fu", "ga", "pe", "vi", "zo", "hu", "ja", "we", "ci", "ro", "ny",
];

/// `n` distinct letter-only words sharing a prefix.
pub fn pseudo_words(prefix: &str, n: usize) -> Vec<String> {
    (0..n)
        .map(|mut i| {
            let mut w = prefix.to_string();
            loop {
                w.push_str(SYLLABLES[i % SYLLABLES.len()]);
                i /= SYLLABLES.len();
                if i == 0 {
                    break;
                }
                i -= 1;
            }
            w
        })
        .collect()
}

/// First-order chain over `words`. Every row, including the start row,
/// lists `branching` equally likely successors. Token rows may list the end
/// of sentence as a successor; the start row never does, so sentences are
/// non-empty and every prediction (end included) has entropy `ln branching`.
#[derive(Debug, Clone)]
pub struct BigramSource {
    words: Vec<String>,
    start: Vec<usize>,
    /// `successors[w]` holds word ids, with `words.len()` marking the end.
    successors: Vec<Vec<usize>>,
}

impl BigramSource {
    pub fn random(words: Vec<String>, branching: usize, rng: &mut impl Rng) -> Result<Self> {
        let n = words.len();
        if branching < 2 || branching > n {
            return Err(Error::invalid(format!("branching {branching} needs 2..={n} words")));
        }
        let ids: Vec<usize> = (0..n).collect();
        let start = ids.choose_multiple(rng, branching).copied().collect();
        let successors = (0..n)
            .map(|_| {
                let mut row: Vec<usize> = ids.choose_multiple(rng, branching - 1).copied().collect();
                row.push(n);
                row
            })
            .collect();
        Ok(BigramSource {
            words,
            start,
            successors,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn branching(&self) -> usize {
        self.start.len()
    }

    /// Per-token perplexity of the source, counting the end of sentence.
    pub fn perplexity(&self) -> f64 {
        self.branching() as f64
    }

    /// One sentence, truncated at `max_len` tokens.
    pub fn sample(&self, max_len: usize, rng: &mut impl Rng) -> Vec<String> {
        let mut out = Vec::new();
        let mut w = *self.start.choose(rng).expect("start row is non-empty");
        while w != self.words.len() && out.len() < max_len {
            out.push(self.words[w].clone());
            w = *self.successors[w].choose(rng).expect("rows are non-empty");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewsConfig {
    pub pairs: usize,
    pub nouns: usize,
    pub verbs: usize,
    pub places: usize,
    /// Probability that a document restates its lead in headline style.
    pub restatement_rate: f64,
    pub seed: u64,
}

impl Default for NewsConfig {
    fn default() -> Self {
        NewsConfig {
            pairs: 2000,
            nouns: 40,
            verbs: 12,
            places: 12,
            restatement_rate: 0.3,
            seed: 1,
        }
    }
}

const ADJECTIVES: [&str; 6] = ["old", "new", "local", "small", "large", "famous"];
const DAYS: [&str; 7] = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const STATES: [&str; 5] = ["missing", "closed", "damaged", "quiet", "busy"];

/// Lead sentence content from which the headline is derived.
struct Event<'a> {
    subject: &'a str,
    verb: &'a str,
    object: &'a str,
    place: &'a str,
}

/// The compression applied to the lead: drop articles, modifiers and the
/// time phrase, and put the verb in the present tense.
pub fn compress_lead(subject: &str, verb_stem: &str, object: &str, place: &str) -> String {
    format!("{subject} {verb_stem}s {object} in {place}")
}

/// Pairs whose headline is [`compress_lead`] applied to the first sentence.
/// Body sentences mention the same entities in other constructions.
pub fn news_corpus(cfg: &NewsConfig) -> Result<Vec<RawPair>> {
    if cfg.nouns < 3 || cfg.verbs == 0 || cfg.places == 0 {
        return Err(Error::invalid("news corpus needs at least 3 nouns, 1 verb and 1 place"));
    }
    if !(0.0..=1.0).contains(&cfg.restatement_rate) {
        return Err(Error::invalid(format!("restatement rate {} outside [0, 1]", cfg.restatement_rate)));
    }
    let nouns = pseudo_words("", cfg.nouns);
    let verbs = pseudo_words("v", cfg.verbs);
    let places = pseudo_words("p", cfg.places);
    let mut rng = derive_rng(cfg.seed, "news-corpus");
    let mut out = Vec::with_capacity(cfg.pairs);
    for i in 0..cfg.pairs {
        let picked: Vec<&String> = nouns.choose_multiple(&mut rng, 3).collect();
        let e = Event {
            subject: picked[0],
            verb: verbs.choose(&mut rng).expect("verbs"),
            object: picked[1],
            place: places.choose(&mut rng).expect("places"),
        };
        let other = picked[2];
        let adj = ADJECTIVES.choose(&mut rng).expect("adjectives");
        let day = DAYS.choose(&mut rng).expect("days");
        let state = STATES.choose(&mut rng).expect("states");
        let lead = format!(
            "The {adj} {} {}ed the {} in {} on {day}.",
            e.subject, e.verb, e.object, e.place
        );
        let mut body = vec![
            format!("Police said the {} and the {} were seen near {}.", e.subject, e.object, e.place),
            format!("The {} had been {state} for weeks, officials said.", e.subject),
            format!("It was not clear why the {} {}ed the {}.", e.subject, e.verb, e.object),
            format!("The {other} declined to comment on the {}.", e.object),
            format!("Residents of {} said the {} was {state}.", e.place, e.object),
        ];
        body.shuffle(&mut rng);
        body.truncate(rng.gen_range(2..=body.len()));
        if rng.gen_bool(cfg.restatement_rate) {
            let at = rng.gen_range(0..=body.len());
            body.insert(
                at,
                format!("{} {}s {} in {}, witnesses say.", e.subject, e.verb, e.object, e.place),
            );
        }
        let mut document = lead;
        for s in body {
            document.push(' ');
            document.push_str(&s);
        }
        out.push(RawPair {
            id: format!("news-{i}"),
            headline: compress_lead(e.subject, e.verb, e.object, e.place),
            document,
        });
    }
    Ok(out)
}
