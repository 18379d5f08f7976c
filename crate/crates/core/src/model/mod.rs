//! The attentive encoder-decoder: parameter layout, forward computation,
//! regime initialization, distant supervision and training.

mod layout;
mod nhg;
mod regime;
mod training;

pub use layout::*;
pub use nhg::*;
pub use regime::*;
pub use training::*;
