//! Headline generation and evaluation: beam search, ROUGE-1/L, paired
//! bootstrap significance and the evaluation report.

mod beam;
mod report;
mod rouge;
mod significance;

pub use beam::{beam_search, Hypothesis};
pub use report::{
    compare, evaluate_system, generate_headlines, score_documents, Comparison, DocScores, EvalConfig,
    EvalReport, Metric, METRICS,
};
pub use rouge::{lcs_len, rouge_l, rouge_n, RougeScore};
pub use significance::{significance_test, Significance};
