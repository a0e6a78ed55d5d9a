//! HTTP service behind the rating studio.
//!
//! * `GET  /api/pairs/next?rater=ID` — next pair to rate (calibration first);
//! * `POST /api/ratings` — store a judgement durably;
//! * `POST /api/score` — multipart PNG + caption → score and design tips;
//! * `GET  /api/search?q=…&k=…&negative=…&lambda=…` — quality-aware search;
//! * `GET  /api/export?split=…` — manifests as JSON Lines;
//! * `/static/…` — files of the data directory (screenshots).
//!
//! The rater id is self-declared and echoed back in a `rater` cookie, which
//! later requests may use instead of the explicit parameter.

mod error;
mod routes;
pub mod store;

use std::path::PathBuf;
use std::sync::Arc;

use jitterlab_assess::EmbeddingIndex;
use jitterlab_model::Model;

pub use error::StudioError;
pub use routes::router;
pub use store::{
    split_export, CalibrationEntry, PairPayload, RatingRequest, RatingStore, CALIBRATION_LEN,
};

/// Everything needed to start the service.
#[derive(Clone, Debug)]
pub struct StudioConfig {
    pub data_dir: PathBuf,
    pub model: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub calibration_len: usize,
    pub seed: u64,
}

impl StudioConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        StudioConfig {
            data_dir: data_dir.into(),
            model: None,
            index: None,
            calibration: None,
            calibration_len: CALIBRATION_LEN,
            seed: 0,
        }
    }
}

/// Shared, immutable-after-start service state.
#[derive(Clone)]
pub struct AppState {
    pub store: Arc<RatingStore>,
    pub model: Option<Arc<Model>>,
    pub index: Option<Arc<EmbeddingIndex>>,
}

impl AppState {
    pub fn open(config: &StudioConfig) -> Result<Self, StudioError> {
        if let Some(c) = &config.calibration {
            if !c.is_file() {
                return Err(StudioError::NotFound(format!(
                    "calibration file {}",
                    c.display()
                )));
            }
        }
        let store = RatingStore::open(
            &config.data_dir,
            config.calibration.as_deref(),
            config.calibration_len,
            config.seed,
        )?;
        let model = config
            .model
            .as_deref()
            .map(jitterlab_model::checkpoint::load)
            .transpose()?
            .map(Arc::new);
        let index = config
            .index
            .as_deref()
            .map(EmbeddingIndex::load)
            .transpose()?
            .map(Arc::new);
        tracing::info!(
            pool = store.pool_len(),
            calibration = store.calibration().len(),
            model = model.is_some(),
            index = index.as_ref().map_or(0, |i| i.len()),
            "studio state ready"
        );
        Ok(AppState {
            store: Arc::new(store),
            model,
            index,
        })
    }
}
