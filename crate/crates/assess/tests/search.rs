//! Index persistence and quality-aware search against a scalar oracle.

use jitterlab_assess::{
    rank_index, search, AssessError, EmbeddingIndex, IndexEntry, DEFAULT_LAMBDA,
};
use jitterlab_core::dataset::well_designed_prompt;
use jitterlab_model::{Model, ModelConfig};

fn model() -> Model {
    Model::init(ModelConfig::default(), 3)
}

fn unit(v: &[f64]) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

/// Five hand-picked embeddings in the span of the query and a fixed direction.
fn five_item_index(q: &[f32]) -> EmbeddingIndex {
    let d = q.len();
    let other: Vec<f64> = (0..d)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let mut index = EmbeddingIndex::default();
    for (i, (a, b)) in [(0.2, 1.0), (1.0, 0.0), (-0.5, 0.4), (0.7, 0.7), (0.0, -1.0)]
        .into_iter()
        .enumerate()
    {
        let v: Vec<f64> = (0..d)
            .map(|j| a * q[j] as f64 + b * other[j] / (d as f64).sqrt())
            .collect();
        index.push(
            IndexEntry {
                id: format!("item-{i}"),
                image: format!("images/{i}.png"),
            },
            unit(&v),
        );
    }
    index
}

fn oracle_order(index: &EmbeddingIndex, q: &[f32]) -> Vec<String> {
    let mut scored: Vec<(f64, String)> = index
        .embeddings
        .iter()
        .zip(&index.entries)
        .map(|(e, entry)| {
            let mut s = 0.0f64;
            for j in 0..e.len() {
                s += e[j] as f64 * q[j] as f64;
            }
            (s, entry.id.clone())
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, id)| id).collect()
}

#[test]
fn five_item_index_matches_the_dot_product_oracle() {
    let m = model();
    let q = m.encode_text(&well_designed_prompt("checkout form").unwrap());
    let index = five_item_index(&q);
    let hits = search(&m, &index, "checkout form", 10, None, DEFAULT_LAMBDA).unwrap();
    let ids: Vec<String> = hits.iter().map(|h| h.id.clone()).collect();
    assert_eq!(ids, oracle_order(&index, &q));
    assert_eq!(ids[0], "item-1");
    assert_eq!(hits.len(), 5, "k larger than the index returns everything");
    for w in hits.windows(2) {
        assert!(w[0].score >= w[1].score);
    }
    assert_eq!(
        search(&m, &index, "checkout form", 2, None, DEFAULT_LAMBDA)
            .unwrap()
            .len(),
        2
    );
}

#[test]
fn zero_lambda_equals_the_plain_query() {
    let m = model();
    let q = m.encode_text(&well_designed_prompt("weather app").unwrap());
    let index = five_item_index(&q);
    let plain = search(&m, &index, "weather app", 5, None, DEFAULT_LAMBDA).unwrap();
    let zero = search(
        &m,
        &index,
        "weather app",
        5,
        Some("ui screenshot. poor design. weather app"),
        0.0,
    )
    .unwrap();
    let ids =
        |h: &[jitterlab_assess::SearchHit]| h.iter().map(|x| x.id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&plain), ids(&zero));
}

#[test]
fn negative_prompt_uses_the_shifted_query() {
    let m = model();
    let q = m.encode_text(&well_designed_prompt("travel blog").unwrap());
    let neg = m.encode_text("ui screenshot. poor design. travel blog");
    let shifted: Vec<f64> = q
        .iter()
        .zip(&neg)
        .map(|(&a, &b)| a as f64 - 0.8 * b as f64)
        .collect();
    let shifted = unit(&shifted);
    let index = five_item_index(&neg);
    let hits = search(
        &m,
        &index,
        "travel blog",
        5,
        Some("ui screenshot. poor design. travel blog"),
        0.8,
    )
    .unwrap();
    let ids: Vec<String> = hits.iter().map(|h| h.id.clone()).collect();
    assert_eq!(ids, oracle_order(&index, &shifted));
}

#[test]
fn the_querys_own_embedding_ranks_first() {
    let m = model();
    let mut index = EmbeddingIndex::default();
    for (i, caption) in [
        "recipe page",
        "bank dashboard",
        "chat window",
        "photo gallery",
    ]
    .iter()
    .enumerate()
    {
        index.push(
            IndexEntry {
                id: format!("s{i}"),
                image: format!("{i}.png"),
            },
            m.encode_text(&well_designed_prompt(caption).unwrap()),
        );
    }
    let hits = search(&m, &index, "chat window", 1, None, DEFAULT_LAMBDA).unwrap();
    assert_eq!(hits[0].id, "s2");
}

#[test]
fn search_errors() {
    let m = model();
    assert!(matches!(
        search(&m, &EmbeddingIndex::default(), "x", 3, None, 0.5),
        Err(AssessError::EmptyIndex)
    ));
    let q = m.encode_text("anything");
    let index = five_item_index(&q);
    assert!(matches!(
        search(&m, &index, "x", 0, None, 0.5),
        Err(AssessError::InvalidArgument(_))
    ));
    assert!(matches!(
        search(&m, &index, "x", 3, None, -1.0),
        Err(AssessError::InvalidArgument(_))
    ));
}

#[test]
fn ties_are_broken_by_id() {
    let e = unit(&[1.0, 0.0]);
    let mut index = EmbeddingIndex::default();
    for id in ["c", "a", "b"] {
        index.push(
            IndexEntry {
                id: id.into(),
                image: format!("{id}.png"),
            },
            e.clone(),
        );
    }
    let ids: Vec<String> = rank_index(&index, &e, 3)
        .into_iter()
        .map(|h| h.id)
        .collect();
    assert_eq!(ids, ["a", "b", "c"]);
}

#[test]
fn index_round_trips_through_disk() {
    let m = model();
    let index = five_item_index(&m.encode_text("round trip"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("idx");
    index.save(&path).unwrap();
    assert_eq!(EmbeddingIndex::load(&path).unwrap(), index);
    let blob = std::fs::metadata(path.join(jitterlab_assess::EMBEDDINGS_FILE))
        .unwrap()
        .len();
    assert_eq!(blob as usize, 5 * 128 * 4);
    assert!(matches!(
        EmbeddingIndex::load(&dir.path().join("missing")),
        Err(AssessError::IoFailure { .. })
    ));
}
