//! Scoring and search endpoints over a checkpoint and an index on disk.

mod common;

use std::collections::BTreeSet;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use common::*;
use jitterlab_assess::{EmbeddingIndex, IndexEntry};
use jitterlab_core::dataset::well_designed_prompt;
use jitterlab_core::doc::Rgb;
use jitterlab_core::jitter::{CrapPrinciple, DefectTag};
use jitterlab_core::raster::Bitmap;
use jitterlab_model::{Model, ModelConfig};
use jitterlab_studio::StudioConfig;

fn with_model(dir: &std::path::Path, index: Option<&EmbeddingIndex>) -> (StudioConfig, Model) {
    let model = Model::init(ModelConfig::default(), 5);
    let ckpt = dir.join("model.ckpt");
    jitterlab_model::checkpoint::save(&model, &ckpt).unwrap();
    let mut cfg = config(dir);
    cfg.model = Some(ckpt);
    if let Some(index) = index {
        let path = dir.join("index");
        index.save(&path).unwrap();
        cfg.index = Some(path);
    }
    (cfg, model)
}

async fn post_score(app: &axum::Router, parts: &[(&str, &[u8])]) -> Reply {
    let (ct, body) = multipart(parts);
    send(
        app,
        Request::post("/api/score")
            .header(header::CONTENT_TYPE, ct)
            .body(Body::from(body))
            .unwrap(),
    )
    .await
}

fn png() -> Vec<u8> {
    let mut b = Bitmap::filled(300, 500, Rgb::new(250, 250, 250));
    b.fill_rect(20, 40, 280, 90, Rgb::new(30, 60, 200));
    b.encode_png().unwrap()
}

fn snapshot(dir: &std::path::Path) -> (Vec<u8>, Vec<u8>) {
    (
        std::fs::read(dir.join("samples.jsonl")).unwrap(),
        std::fs::read(dir.join("pairs.jsonl")).unwrap(),
    )
}

#[tokio::test]
async fn score_returns_score_and_projected_suggestions() {
    let dir = fixture(3, 4);
    let (cfg, model) = with_model(dir.path(), None);
    let app = app(&cfg);
    let before = snapshot(dir.path());
    let image = png();
    let r = post_score(&app, &[("image", &image), ("caption", b"login screen")]).await;
    assert_eq!(
        r.status,
        StatusCode::OK,
        "{}",
        String::from_utf8_lossy(&r.body)
    );
    let v = r.json();
    let bitmap = Bitmap::decode_png(&image).unwrap();
    let expected = jitterlab_assess::design_score(&model, &bitmap, "login screen").unwrap();
    assert!((v["score"].as_f64().unwrap() - expected).abs() < 1e-12);
    let threshold = v["threshold"].as_f64().unwrap();
    let crap: BTreeSet<String> = CrapPrinciple::ALL
        .iter()
        .map(|p| p.defect_tag().phrase().to_string())
        .collect();
    for s in v["suggestions"].as_array().unwrap() {
        assert!(s["score"].as_f64().unwrap() > threshold);
        assert!(crap.contains(s["tag"].as_str().unwrap()));
    }
    let again = post_score(&app, &[("image", &image), ("caption", b"login screen")]).await;
    assert_eq!(again.body, r.body, "scoring is deterministic");

    let all = post_score(
        &app,
        &[
            ("image", &image),
            ("caption", b"login screen"),
            ("mode", b"all-tags"),
        ],
    )
    .await
    .json();
    for s in all["suggestions"].as_array().unwrap() {
        assert!(DefectTag::from_phrase(s["tag"].as_str().unwrap()).is_some());
        assert!(s["score"].as_f64().unwrap() > threshold);
    }
    assert_eq!(
        snapshot(dir.path()),
        before,
        "scoring never touches the stores"
    );
}

#[tokio::test]
async fn score_validation() {
    let dir = fixture(3, 4);
    let (cfg, _) = with_model(dir.path(), None);
    let app = app(&cfg);
    let image = png();
    assert_eq!(
        post_score(&app, &[("image", &image), ("caption", b"  ")])
            .await
            .status,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    assert_eq!(
        post_score(&app, &[("image", &image)]).await.status,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    assert_eq!(
        post_score(&app, &[("image", b"not a png"), ("caption", b"x")])
            .await
            .status,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        post_score(&app, &[("caption", b"x")]).await.status,
        StatusCode::BAD_REQUEST
    );

    let bare = common::app(&config(dir.path()));
    assert_eq!(
        post_score(&bare, &[("image", &image), ("caption", b"x")])
            .await
            .status,
        StatusCode::SERVICE_UNAVAILABLE
    );
}

fn unit(v: &[f64]) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

/// Five entries in the span of the query direction and a fixed second axis.
fn five_item_index(q: &[f32]) -> EmbeddingIndex {
    let d = q.len();
    let mut index = EmbeddingIndex::default();
    for (i, (a, b)) in [(0.2, 1.0), (1.0, 0.0), (-0.5, 0.4), (0.7, 0.7), (0.0, -1.0)]
        .into_iter()
        .enumerate()
    {
        let v: Vec<f64> = (0..d)
            .map(|j| a * q[j] as f64 + b * if j % 2 == 0 { 1.0 } else { -1.0 } / (d as f64).sqrt())
            .collect();
        index.push(
            IndexEntry {
                id: format!("c0-s{i}"),
                image: format!("images/c0-s{i}.png"),
            },
            unit(&v),
        );
    }
    index
}

fn oracle(index: &EmbeddingIndex, q: &[f32]) -> Vec<String> {
    let mut scored: Vec<(f64, String)> = index
        .embeddings
        .iter()
        .zip(&index.entries)
        .map(|(e, en)| {
            (
                e.iter().zip(q).map(|(&x, &y)| x as f64 * y as f64).sum(),
                en.id.clone(),
            )
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().map(|s| s.1).collect()
}

fn ids(v: &serde_json::Value) -> Vec<String> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|h| h["id"].as_str().unwrap().to_string())
        .collect()
}

#[tokio::test]
async fn search_ranks_by_the_oracle_and_serves_images() {
    let dir = fixture(1, 5);
    let model = Model::init(ModelConfig::default(), 5);
    let q = model.encode_text(&well_designed_prompt("photo gallery").unwrap());
    let index = five_item_index(&q);
    let (cfg, _) = with_model(dir.path(), Some(&index));
    let app = app(&cfg);
    let before = snapshot(dir.path());

    let r = get(&app, "/api/search?q=photo%20gallery&k=3").await;
    assert_eq!(r.status, StatusCode::OK);
    let top = r.json();
    assert_eq!(ids(&top), oracle(&index, &q)[..3].to_vec());

    let full = get(&app, "/api/search?q=photo%20gallery&k=50").await.json();
    assert_eq!(ids(&full), oracle(&index, &q));
    let scores: Vec<f64> = full
        .as_array()
        .unwrap()
        .iter()
        .map(|h| h["score"].as_f64().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    let plain = get(&app, "/api/search?q=photo%20gallery").await.json();
    let zero = get(
        &app,
        "/api/search?q=photo%20gallery&negative=ui%20screenshot.%20poor%20design.&lambda=0",
    )
    .await
    .json();
    assert_eq!(ids(&plain), ids(&zero));

    let url = top[0]["image_url"].as_str().unwrap();
    let img = get(&app, url).await;
    assert_eq!(img.status, StatusCode::OK);
    assert!(Bitmap::decode_png(&img.body).is_ok());
    assert_eq!(
        snapshot(dir.path()),
        before,
        "search never touches the stores"
    );

    assert_eq!(
        get(&app, "/api/search?q=").await.status,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    assert_eq!(
        get(&app, "/api/search?q=x&k=0").await.status,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        get(&app, "/api/search?q=x&lambda=-2").await.status,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn search_without_an_index_is_unavailable() {
    let dir = fixture(1, 5);
    let (cfg, _) = with_model(dir.path(), None);
    assert_eq!(
        get(&app(&cfg), "/api/search?q=anything").await.status,
        StatusCode::SERVICE_UNAVAILABLE
    );
}
