//! Embedding index on disk and quality-aware search over it.
//!
//! An index directory holds `entries.jsonl` (one `{id, image}` object per
//! line) and `embeddings.bin` (N×D little-endian `f32`, rows in entry order).

use std::fs;
use std::io::Write;
use std::path::Path;

use jitterlab_core::dataset::{
    read_jsonl, well_designed_prompt, write_jsonl, ForgeLayout, UISample,
};
use jitterlab_core::raster::Bitmap;
use jitterlab_model::{dot, normalize, Embedding, Model};
use serde::{Deserialize, Serialize};

use crate::score::embed_screenshot;
use crate::AssessError;

pub const ENTRIES_FILE: &str = "entries.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
/// Default weight of a negative prompt.
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    /// Image path (relative to the dataset it was built from).
    pub image: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingIndex {
    pub entries: Vec<IndexEntry>,
    pub embeddings: Vec<Embedding>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub id: String,
    pub image: String,
    pub score: f64,
}

impl EmbeddingIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: IndexEntry, embedding: Embedding) {
        self.entries.push(entry);
        self.embeddings.push(embedding);
    }

    pub fn save(&self, dir: &Path) -> Result<(), AssessError> {
        fs::create_dir_all(dir).map_err(|e| AssessError::io(dir, e))?;
        write_jsonl(&dir.join(ENTRIES_FILE), &self.entries)?;
        let path = dir.join(EMBEDDINGS_FILE);
        let mut bytes = Vec::with_capacity(self.embeddings.iter().map(Vec::len).sum::<usize>() * 4);
        for v in self.embeddings.iter().flatten() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = fs::File::create(&path).map_err(|e| AssessError::io(&path, e))?;
        f.write_all(&bytes)
            .and_then(|_| f.sync_all())
            .map_err(|e| AssessError::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self, AssessError> {
        let entries_path = dir.join(ENTRIES_FILE);
        if !entries_path.exists() {
            return Err(AssessError::io(
                &entries_path,
                std::io::ErrorKind::NotFound.into(),
            ));
        }
        let entries: Vec<IndexEntry> = read_jsonl(&entries_path)?;
        let path = dir.join(EMBEDDINGS_FILE);
        let bytes = fs::read(&path).map_err(|e| AssessError::io(&path, e))?;
        if entries.is_empty() {
            return Ok(EmbeddingIndex::default());
        }
        let floats: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        if bytes.len() % 4 != 0 || floats.len() % entries.len() != 0 {
            return Err(AssessError::ShapeMismatch(format!(
                "{} bytes of embeddings do not divide into {} rows",
                bytes.len(),
                entries.len()
            )));
        }
        let d = floats.len() / entries.len();
        Ok(EmbeddingIndex {
            entries,
            embeddings: floats.chunks(d).map(<[f32]>::to_vec).collect(),
        })
    }
}

/// Embeds every sample of a forged dataset (optionally only originals).
pub fn build_index(
    model: &Model,
    dataset: &Path,
    samples: &[UISample],
) -> Result<EmbeddingIndex, AssessError> {
    let layout = ForgeLayout::new(dataset);
    let mut index = EmbeddingIndex::default();
    for s in samples {
        let bitmap = Bitmap::read_png(&layout.image_path(&s.image))?;
        index.push(
            IndexEntry {
                id: s.id.clone(),
                image: s.image.clone(),
            },
            embed_screenshot(model, &bitmap)?,
        );
    }
    Ok(index)
}

/// Top-`k` entries for `query` (prefixed with the well-designed prompt).
/// With a negative prompt the query vector becomes
/// `normalize(q − λ·encode(negative))`. Ties are broken by id.
pub fn search(
    model: &Model,
    index: &EmbeddingIndex,
    query: &str,
    k: usize,
    negative: Option<&str>,
    lambda: f64,
) -> Result<Vec<SearchHit>, AssessError> {
    if index.is_empty() {
        return Err(AssessError::EmptyIndex);
    }
    if k == 0 {
        return Err(AssessError::InvalidArgument("k must be at least 1".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(AssessError::InvalidArgument(format!(
            "lambda must be a finite non-negative number, got {lambda}"
        )));
    }
    let q = model.encode_text(&well_designed_prompt(query).map_err(|_| AssessError::EmptyCaption)?);
    let q = match negative {
        Some(neg) => {
            let n = model.encode_text(neg);
            normalize(
                &q.iter()
                    .zip(&n)
                    .map(|(&a, &b)| a as f64 - lambda * b as f64)
                    .collect::<Vec<_>>(),
            )
        }
        None => q,
    };
    Ok(rank_index(index, &q, k))
}

/// Top-`k` entries by dot product with `query`, ties broken by id.
pub fn rank_index(index: &EmbeddingIndex, query: &[f32], k: usize) -> Vec<SearchHit> {
    let mut scored: Vec<(f64, usize)> = index
        .embeddings
        .iter()
        .map(|e| dot(e, query))
        .zip(0..)
        .collect();
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| index.entries[a.1].id.cmp(&index.entries[b.1].id))
    });
    scored
        .into_iter()
        .take(k)
        .map(|(score, i)| SearchHit {
            id: index.entries[i].id.clone(),
            image: index.entries[i].image.clone(),
            score,
        })
        .collect()
}
