//! A small dual encoder that maps screenshots and their descriptions into a
//! shared unit-norm embedding space.
//!
//! The image tower embeds 32-pixel patches of a 224-pixel square input; the
//! text tower embeds hashed word tokens. Training uses a symmetric
//! batch-contrastive objective and a pairwise objective that prefers the
//! better of two screenshots for a "well-designed" prompt. Gradients come
//! from a purpose-built reverse-mode tape ([`tape`]) that is generic over
//! `f32`/`f64`, so the same code path can be checked against finite
//! differences in double precision.

pub mod checkpoint;
pub mod data;
pub mod encoder;
pub mod gradcheck;
pub mod loss;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tape;
pub mod tokenizer;
pub mod train;

use thiserror::Error;

pub use data::DatasetView;
pub use encoder::{dot, normalize, Embedding};
pub use loss::{clip_loss, pairwise_loss, LITERAL_TAU};
pub use params::{ModelConfig, Params};
pub use train::{
    run_schedule, train_stage, LrSchedule, Objective, ScheduleConfig, StageTrace, TrainConfig,
    DESK_EPOCHS, DESK_PAIRWISE_EPOCHS,
};

/// `f32` parameters: the form used for training and inference.
pub type Model = Params<f32>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("expected a {expected}x{expected} image, got {width}x{height}")]
    BadDimensions {
        expected: usize,
        width: u32,
        height: u32,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dataset view is empty")]
    EmptyDataset,
    #[error("training diverged at step {step}")]
    Diverged { step: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Dataset(#[from] jitterlab_core::dataset::DatasetError),
    #[error(transparent)]
    Raster(#[from] jitterlab_core::raster::RasterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
