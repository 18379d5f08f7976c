//! Dense numerics: tensors, initialization, the gradient tape, GRU cells,
//! Adam and gradient clipping.
//!
//! All arithmetic is double precision.

mod adam;
mod grad;
pub mod gradcheck;
mod gru;
mod init;
mod ops;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use grad::{clip_global_norm, Gradients};
pub use gru::{gru_cell_forward, gru_step, GruParams, GruVars, GATES};
pub use init::{derive_rng, glorot_bound, glorot_init, SeededRng};
pub use ops::{cross_entropy_seq, log_sum_exp, sigmoid, softmax};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
