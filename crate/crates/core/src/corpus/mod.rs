//! Corpus ingestion: preprocessing, sentence splitting, vocabularies,
//! pair files and mini-batching.

mod batch;
mod pairs;
mod preprocess;
mod sentences;
mod vocab;

pub use batch::{batch_indices, make_batches, Batch, PairBatch};
pub use pairs::{
    pairs_to_string, parse_pairs, read_pairs, write_pairs, HeadlinePair, RawPair, TokenizedPair,
};
pub use preprocess::{normalize, preprocess_en, tokenize, BoilerplateRules, DEFAULT_BOILERPLATE};
pub use sentences::{sentence_spans, SentenceSplitter, DEFAULT_ABBREVIATIONS};
pub use vocab::{Vocabulary, BOS, EOS, PAD, SPECIALS, UNK};
