pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod lm;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod selection;
pub mod store;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
