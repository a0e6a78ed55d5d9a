//! Service errors and their HTTP mapping.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

use jitterlab_assess::AssessError;
use jitterlab_core::dataset::DatasetError;
use jitterlab_model::ModelError;

#[derive(Debug, Error)]
pub enum StudioError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid submission: {0}")]
    Unprocessable(String),
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Assess(#[from] AssessError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl StudioError {
    pub fn status(&self) -> StatusCode {
        match self {
            StudioError::BadRequest(_) => StatusCode::BAD_REQUEST,
            StudioError::NotFound(_) => StatusCode::NOT_FOUND,
            StudioError::Conflict(_) => StatusCode::CONFLICT,
            StudioError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StudioError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            StudioError::Dataset(DatasetError::Validation(_) | DatasetError::EmptyCaption) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            StudioError::Assess(AssessError::EmptyCaption) => StatusCode::UNPROCESSABLE_ENTITY,
            StudioError::Assess(AssessError::InvalidArgument(_)) => StatusCode::BAD_REQUEST,
            StudioError::Assess(AssessError::EmptyIndex) => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for StudioError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (
            status,
            Json(serde_json::json!({ "error": self.to_string() })),
        )
            .into_response()
    }
}
