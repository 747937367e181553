//! The online system: retrieval, the search pipeline with a deadline-bound
//! suggestion branch, and the HTTP API.

pub mod config;
pub mod engine;
pub mod http;
pub mod index;

pub use config::{ServingConfig, SuggestMode};
pub use engine::{
    read_workload, replay, strip_timings, write_workload, AutocompleteResponse, Engine, IntentResponse, Models,
    Request, SearchHit, SearchResponse, SearchResults, SuggestResponse, SuggestionStatus, TagResponse, TagSpan,
};
pub use index::{InvertedIndex, Posting, DEFAULT_LIMIT};
