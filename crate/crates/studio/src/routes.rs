//! Request handlers.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use jitterlab_assess::{
    design_score, search, suggest_defects, SuggestMode, Suggestion, DEFAULT_LAMBDA,
};
use jitterlab_core::dataset::Split;
use jitterlab_core::jitter::DefectTag;
use jitterlab_core::raster::Bitmap;

use crate::store::{static_url, RatingRequest};
use crate::{AppState, StudioError};

const MAX_UPLOAD: usize = 32 * 1024 * 1024;

pub fn router(state: AppState) -> Router {
    let static_dir = ServeDir::new(state.store.data_dir());
    Router::new()
        .route("/api/pairs/next", get(next_pair))
        .route("/api/ratings", post(submit_rating))
        .route(
            "/api/score",
            post(score).layer(DefaultBodyLimit::max(MAX_UPLOAD)),
        )
        .route("/api/search", get(search_index))
        .route("/api/export", get(export))
        .nest_service("/static", static_dir)
        .with_state(state)
}

fn cookie_rater(headers: &HeaderMap) -> Option<String> {
    headers
        .get_all(header::COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|kv| kv.trim().strip_prefix("rater="))
        .map(str::to_string)
        .next()
}

fn with_rater_cookie(mut response: Response, rater: &str) -> Response {
    if let Ok(v) = HeaderValue::from_str(&format!("rater={rater}; Path=/; SameSite=Lax")) {
        response.headers_mut().insert(header::SET_COOKIE, v);
    }
    response
}

fn rater_of(explicit: Option<String>, headers: &HeaderMap) -> Result<String, StudioError> {
    explicit
        .filter(|r| !r.is_empty())
        .or_else(|| cookie_rater(headers))
        .ok_or_else(|| StudioError::BadRequest("missing rater id".into()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, StudioError> + Send + 'static,
) -> Result<T, StudioError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| StudioError::Internal(e.to_string()))?
}

async fn next_pair(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> Result<Response, StudioError> {
    let rater = rater_of(q.get("rater").cloned(), &headers)?;
    let store = Arc::clone(&state.store);
    let r = rater.clone();
    let payload = blocking(move || store.next_pair(&r)).await?;
    Ok(with_rater_cookie(Json(payload).into_response(), &rater))
}

async fn submit_rating(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: axum::body::Bytes,
) -> Result<Response, StudioError> {
    let req: RatingRequest = serde_json::from_slice(&body)
        .map_err(|e| StudioError::Unprocessable(format!("malformed rating: {e}")))?;
    let rater = rater_of(req.rater.clone(), &headers)?;
    let store = Arc::clone(&state.store);
    let r = rater.clone();
    let pair = blocking(move || store.submit(&r, &req)).await?;
    Ok(with_rater_cookie(
        (StatusCode::CREATED, Json(pair)).into_response(),
        &rater,
    ))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub score: f64,
    pub threshold: f64,
    pub suggestions: Vec<Suggestion>,
}

async fn score(
    State(state): State<AppState>,
    mut multipart: Multipart,
) -> Result<Json<ScoreResponse>, StudioError> {
    let (mut image, mut caption, mut mode) = (None, None, SuggestMode::CrapOnly);
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| StudioError::BadRequest(e.to_string()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| StudioError::BadRequest(e.to_string()))?;
        match name.as_str() {
            "image" => image = Some(bytes),
            "caption" => caption = Some(String::from_utf8_lossy(&bytes).into_owned()),
            "mode" => {
                mode = match &bytes[..] {
                    b"all-tags" => SuggestMode::AllTags,
                    b"crap-only" => SuggestMode::CrapOnly,
                    other => {
                        return Err(StudioError::BadRequest(format!(
                            "unknown mode `{}`",
                            String::from_utf8_lossy(other)
                        )))
                    }
                }
            }
            _ => {}
        }
    }
    let image = image.ok_or_else(|| StudioError::BadRequest("missing `image` field".into()))?;
    let caption = caption.unwrap_or_default();
    if caption.trim().is_empty() {
        return Err(StudioError::Unprocessable(
            "caption must not be empty".into(),
        ));
    }
    let bitmap = Bitmap::decode_png(&image)
        .map_err(|e| StudioError::BadRequest(format!("undecodable image: {e}")))?;
    let model = state
        .model
        .clone()
        .ok_or_else(|| StudioError::Unavailable("no model loaded".into()))?;
    let response = blocking(move || {
        let score = design_score(&model, &bitmap, &caption)?;
        let (threshold, suggestions) =
            suggest_defects(&model, &bitmap, &caption, &DefectTag::ALL, mode)?;
        Ok(ScoreResponse {
            score,
            threshold,
            suggestions,
        })
    })
    .await?;
    Ok(Json(response))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SearchResult {
    pub id: String,
    pub image_url: String,
    pub score: f64,
}

async fn search_index(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Vec<SearchResult>>, StudioError> {
    let index = state
        .index
        .clone()
        .ok_or_else(|| StudioError::Unavailable("no search index loaded".into()))?;
    let model = state
        .model
        .clone()
        .ok_or_else(|| StudioError::Unavailable("no model loaded".into()))?;
    let query = q.get("q").cloned().unwrap_or_default();
    if query.trim().is_empty() {
        return Err(StudioError::Unprocessable(
            "query `q` must not be empty".into(),
        ));
    }
    let k = match q.get("k") {
        Some(k) => k
            .parse::<usize>()
            .map_err(|_| StudioError::BadRequest(format!("bad k `{k}`")))?,
        None => 10,
    };
    let lambda = match q.get("lambda") {
        Some(l) => l
            .parse::<f64>()
            .map_err(|_| StudioError::BadRequest(format!("bad lambda `{l}`")))?,
        None => DEFAULT_LAMBDA,
    };
    let negative = q.get("negative").filter(|n| !n.trim().is_empty()).cloned();
    let hits = blocking(move || {
        Ok(search(
            &model,
            &index,
            &query,
            k,
            negative.as_deref(),
            lambda,
        )?)
    })
    .await?;
    Ok(Json(
        hits.into_iter()
            .map(|h| SearchResult {
                id: h.id,
                image_url: static_url(&h.image),
                score: h.score,
            })
            .collect(),
    ))
}

async fn export(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, StudioError> {
    let split = match q.get("split").filter(|s| !s.is_empty()) {
        Some(s) => Some(s.parse::<Split>().map_err(StudioError::NotFound)?),
        None => None,
    };
    let store = Arc::clone(&state.store);
    let body = blocking(move || store.export(split)).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}
