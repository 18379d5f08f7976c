//! Cross-entropy difference data selection.
//!
//! Document sentences are ranked by `H_in(s) - H_out(s)` where the in-domain
//! model is trained on headlines and the out-of-domain model on document
//! sentences. The retained fraction is the one whose selected subset best
//! predicts validation headlines.

mod ngram;
mod select;

pub use ngram::{ce_diff_score, cross_entropy, event_id, ConditionalLm, NGramLm};
pub use select::{
    filter_sentences, pick_cutoff, ranking, retained_len, score_sentences, select_cutoff,
    NGramConfig, ScoredSentence, SelectionResult, DEFAULT_GRID,
};
