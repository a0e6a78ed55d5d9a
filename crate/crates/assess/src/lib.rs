//! Inference and evaluation on top of a trained dual encoder.
//!
//! Screenshots of any size are embedded by averaging sliding-window
//! embeddings ([`embed_screenshot`]); everything else — design scores, pair
//! choices, defect suggestions, ranking and retrieval — is a dot product
//! between that embedding and a text embedding. [`eval`] computes the
//! aggregate metrics over datasets.

pub mod eval;
pub mod harness;
mod index;
mod score;
pub mod windows;

use thiserror::Error;

pub use index::{
    build_index, rank_index, search, EmbeddingIndex, IndexEntry, SearchHit, DEFAULT_LAMBDA,
    EMBEDDINGS_FILE, ENTRIES_FILE,
};
pub use score::{
    choose_better, design_score, embed_screenshot, project_to_crap, rank_candidates,
    score_embedding, suggest_defects, suggest_for_embedding, SuggestMode, Suggestion,
};
pub use windows::{plan_windows, window_offsets, WindowPlan, WINDOW};

#[derive(Debug, Error)]
pub enum AssessError {
    #[error("caption must not be empty")]
    EmptyCaption,
    #[error("the search index is empty")]
    EmptyIndex,
    #[error("no strict-preference pairs to evaluate")]
    NoPairs,
    #[error("at least two samples are required")]
    NoSamples,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o failure at {path}: {source}")]
    IoFailure {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] jitterlab_model::ModelError),
    #[error(transparent)]
    Dataset(#[from] jitterlab_core::dataset::DatasetError),
    #[error(transparent)]
    Raster(#[from] jitterlab_core::raster::RasterError),
}

impl AssessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        AssessError::IoFailure {
            path: path.display().to_string(),
            source,
        }
    }
}
