pub mod autocomplete;
pub mod data;
pub mod error;
pub mod evalbench;
pub mod intent;
pub mod nn;
pub mod pipeline;
pub mod ranker;
pub mod serving;
pub mod suggest;
pub mod tagger;
pub mod text;

pub use error::{Error, Result};
