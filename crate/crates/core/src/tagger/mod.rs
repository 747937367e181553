//! Query named-entity tagging: linear-chain and semi-Markov CRFs with
//! handcrafted features and optional BiLSTM emissions.

pub mod features;
pub mod inference;
pub mod model;
pub mod schema;

pub use inference::{ChainMarginals, ChainPotentials, LabeledSegment, SemiMarginals, SemiPotentials};
pub use model::{entity_f1, Tagger, TaggerConfig, TaggerMode};
pub use schema::{BioLabel, Segmentation, BIO_LABELS, DEFAULT_MAX_SEGMENT, SEGMENT_LABELS};
