//! Caption clustering with DBSCAN over cosine distance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Source, UISample};
use crate::seed::fnv1a;

pub const DEFAULT_EPSILON: f32 = 0.1;
pub const DEFAULT_MIN_SAMPLES: usize = 5;
const CAPTION_DIMS: usize = 512;

/// Anything that maps a caption to a vector; the clustering only needs
/// cosine geometry.
pub trait CaptionEmbedder {
    fn embed(&self, caption: &str) -> Vec<f32>;
}

/// Hashed term-frequency vectors over lowercased word unigrams, L2-normalized.
#[derive(Clone, Copy, Debug)]
pub struct HashedTfEmbedder {
    pub dims: usize,
}

impl Default for HashedTfEmbedder {
    fn default() -> Self {
        Self { dims: CAPTION_DIMS }
    }
}

impl CaptionEmbedder for HashedTfEmbedder {
    fn embed(&self, caption: &str) -> Vec<f32> {
        let mut v = vec![0f32; self.dims];
        let lower = caption.to_lowercase();
        for word in lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
        {
            v[(fnv1a(word.as_bytes()) % self.dims as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

/// `1 − cos(a, b)`; a zero vector is at distance 1 from everything.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> f32 {
    let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f32>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f32>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na * nb)).max(0.0)
}

/// Classic DBSCAN. `min_samples` counts the point itself. Clusters are
/// numbered in order of their first core point; a border point joins the
/// first cluster that reaches it. Returns `None` for noise.
pub fn dbscan(points: &[Vec<f32>], epsilon: f32, min_samples: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| cosine_distance(&points[i], &points[j]) <= epsilon)
                .collect()
        })
        .collect();
    let is_core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_samples).collect();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if !is_core[start] || labels[start].is_some() {
            continue;
        }
        let cluster = next;
        next += 1;
        labels[start] = Some(cluster);
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if labels[q].is_none() {
                    labels[q] = Some(cluster);
                    if is_core[q] {
                        stack.push(q);
                    }
                }
            }
        }
    }
    labels
}

/// Sample id → cluster id (`None` = noise).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub clusters: BTreeMap<String, Option<u64>>,
}

impl ClusterAssignment {
    pub fn get(&self, sample_id: &str) -> Option<u64> {
        self.clusters.get(sample_id).copied().flatten()
    }

    pub fn cluster_count(&self) -> usize {
        let mut ids: Vec<u64> = self.clusters.values().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Clusters synthetic-origin and real-origin samples in separate DBSCAN runs,
/// so no cluster mixes the two; ids of the second run follow the first.
pub fn cluster_by_caption(
    samples: &[UISample],
    epsilon: f32,
    min_samples: usize,
    embedder: &dyn CaptionEmbedder,
) -> ClusterAssignment {
    let mut out = ClusterAssignment::default();
    let mut offset = 0u64;
    for synthetic in [true, false] {
        let group: Vec<&UISample> = samples
            .iter()
            .filter(|s| (s.source == Source::Synthetic) == synthetic)
            .collect();
        let points: Vec<Vec<f32>> = group.iter().map(|s| embedder.embed(&s.caption)).collect();
        let labels = dbscan(&points, epsilon, min_samples);
        let count = labels.iter().flatten().max().map_or(0, |m| m + 1) as u64;
        for (s, l) in group.iter().zip(labels) {
            out.clusters
                .insert(s.id.clone(), l.map(|l| l as u64 + offset));
        }
        offset += count;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedder_is_normalized_and_lexical() {
        let e = HashedTfEmbedder::default();
        let a = e.embed("Blue Login screen");
        let b = e.embed("blue login, screen!");
        assert_eq!(a, b);
        assert!((a.iter().map(|x| x * x).sum::<f32>() - 1.0).abs() < 1e-6);
        assert!(e.embed("...").iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_vector_distance() {
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), 1.0);
        assert!(cosine_distance(&[1.0, 0.0], &[2.0, 0.0]).abs() < 1e-6);
    }
}
