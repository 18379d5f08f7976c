//! Experiment orchestration: configuration, manifest-gated stages and the
//! file layout of an output directory.

mod commands;
mod config;
mod manifest;

pub use commands::{
    distant_ckpt, model_ckpt, regime_group_names, split_path, Dataset, ModelRef, PreprocessSummary, TrainOutcome,
    Workspace, DECODER_CKPT, DEC_VOCAB, ENCODER_CKPT, ENC_VOCAB, SELECTION_CUTOFFS, SELECTION_REPORT,
    SELECTION_RETAINED, SPLITS,
};
pub use config::{hex, Config};
pub use manifest::{file_sha256, Manifest, StageRecord, MANIFEST_FILE};
