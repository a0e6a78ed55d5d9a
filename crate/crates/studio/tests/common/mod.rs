#![allow(dead_code)]

use std::path::Path;

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use tempfile::TempDir;
use tower::ServiceExt;

use jitterlab_core::dataset::{
    write_jsonl, ClusterAssignment, PreferencePair, QualityTag, Source, Split, UISample,
    CLUSTERS_FILE,
};
use jitterlab_core::doc::{Device, Rgb};
use jitterlab_core::raster::Bitmap;
use jitterlab_studio::{router, AppState, StudioConfig};

/// Clusters of identical captions (so DBSCAN groups them), one split each.
pub const CLUSTERS: [(&str, Split); 3] = [
    ("login screen", Split::Train),
    ("shopping cart", Split::Val),
    ("music player", Split::Test),
];

pub fn sample(cluster: usize, i: usize) -> UISample {
    let (caption, split) = CLUSTERS[cluster];
    let id = format!("c{cluster}-s{i}");
    UISample {
        id: id.clone(),
        image: format!("images/{id}.png"),
        caption: caption.to_string(),
        quality: QualityTag::None,
        defects: vec![],
        source: Source::Real,
        device: Device::Mobile,
        origin_id: id.clone(),
        key: format!("https://example.com/{id}"),
        split,
    }
}

/// Writes a rating pool of `per_cluster` screenshots in each of `clusters`
/// caption clusters, plus one pre-existing unrated pair record.
pub fn fixture(clusters: usize, per_cluster: usize) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("images")).unwrap();
    let mut samples = Vec::new();
    for c in 0..clusters {
        for i in 0..per_cluster {
            let s = sample(c, i);
            Bitmap::filled(64, 96, Rgb::new((40 * c) as u8, (20 * i) as u8, 128))
                .write_png(&dir.path().join(&s.image))
                .unwrap();
            samples.push(s);
        }
    }
    write_jsonl(&dir.path().join("samples.jsonl"), &samples).unwrap();
    let clusters = ClusterAssignment {
        clusters: samples
            .iter()
            .map(|s| (s.id.clone(), Some(s.id[1..2].parse::<u64>().unwrap())))
            .collect(),
    };
    std::fs::write(
        dir.path().join(CLUSTERS_FILE),
        serde_json::to_string(&clusters).unwrap(),
    )
    .unwrap();
    let seed_pair = PreferencePair {
        pair_id: "seed-pair".into(),
        a: "c0-s0".into(),
        b: "c0-s1".into(),
        preferred: jitterlab_core::dataset::Choice::A,
        principles: vec![],
        caption: "login screen".into(),
        rater_id: None,
        cluster_id: None,
        split: Split::Train,
        irrelevant: false,
        note: None,
    };
    write_jsonl(&dir.path().join("pairs.jsonl"), &[seed_pair]).unwrap();
    dir
}

pub fn config(dir: &Path) -> StudioConfig {
    StudioConfig::new(dir)
}

pub fn app(config: &StudioConfig) -> Router {
    router(AppState::open(config).unwrap())
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: axum::http::HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let body = to_bytes(res.into_body(), usize::MAX)
        .await
        .unwrap()
        .to_vec();
    Reply {
        status,
        headers,
        body,
    }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn get_with_cookie(app: &Router, uri: &str, cookie: &str) -> Reply {
    send(
        app,
        Request::get(uri)
            .header(header::COOKIE, cookie)
            .body(Body::empty())
            .unwrap(),
    )
    .await
}

pub async fn post_json(app: &Router, uri: &str, body: serde_json::Value) -> Reply {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

pub async fn next_pair(app: &Router, rater: &str) -> Reply {
    get(app, &format!("/api/pairs/next?rater={rater}")).await
}

pub async fn rate(
    app: &Router,
    rater: &str,
    pair_id: &str,
    choice: &str,
    principles: &[&str],
) -> Reply {
    post_json(
        app,
        "/api/ratings",
        serde_json::json!({
            "pair_id": pair_id, "rater": rater, "caption": "login screen",
            "choice": choice, "principles": principles,
        }),
    )
    .await
}

/// A multipart/form-data body with the given (name, bytes) parts.
pub fn multipart(parts: &[(&str, &[u8])]) -> (String, Vec<u8>) {
    let boundary = "----studio-test-boundary";
    let mut body = Vec::new();
    for (name, bytes) in parts {
        body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
        let filename = if *name == "image" {
            "; filename=\"shot.png\""
        } else {
            ""
        };
        body.extend_from_slice(
            format!("Content-Disposition: form-data; name=\"{name}\"{filename}\r\n\r\n").as_bytes(),
        );
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

/// Sample ids of a served pair, recovered from its image URLs.
pub fn pair_samples(payload: &serde_json::Value) -> (String, String) {
    let id = |k: &str| {
        let url = payload[k].as_str().unwrap();
        url.trim_start_matches("/static/images/")
            .trim_end_matches(".png")
            .to_string()
    };
    (id("image_a"), id("image_b"))
}
