//! The two encoder towers.
//!
//! Both towers are pre-norm transformers: an input projection (patch
//! projection or token lookup) plus learned positions, `layers` blocks of
//! attention and GELU feed-forward, a final layer norm, mean pooling over the
//! sequence, a linear projection to the embedding width, and L2
//! normalization. Batches are packed row-wise and attention is confined to
//! each sequence's segment.

use std::rc::Rc;

use jitterlab_core::raster::Bitmap;

use crate::params::{Params, TowerIdx};
use crate::scalar::Scalar;
use crate::tape::{Segments, Tape, Var};
use crate::tokenizer::tokenize_with;
use crate::ModelError;

/// A unit-norm embedding.
pub type Embedding = Vec<f32>;

/// Maps a byte channel to `[-1, 1]`.
fn normalize_channel(v: u8) -> f32 {
    v as f32 / 127.5 - 1.0
}

/// Cuts a square RGB image (`side×side×3` bytes) into patch rows. Each row is
/// a patch flattened in (y, x, channel) order; patch `i` sits at grid
/// position `(i / per_side, i % per_side)`.
pub fn patchify(pixels: &[u8], side: usize, patch: usize) -> Vec<f32> {
    assert_eq!(
        pixels.len(),
        side * side * 3,
        "patchify expects a square RGB image"
    );
    let per_side = side / patch;
    let dim = patch * patch * 3;
    let mut out = vec![0.0f32; per_side * per_side * dim];
    for py in 0..per_side {
        for px in 0..per_side {
            let base = (py * per_side + px) * dim;
            for y in 0..patch {
                let src = ((py * patch + y) * side + px * patch) * 3;
                let dst = base + y * patch * 3;
                for (o, &v) in out[dst..dst + patch * 3]
                    .iter_mut()
                    .zip(&pixels[src..src + patch * 3])
                {
                    *o = normalize_channel(v);
                }
            }
        }
    }
    out
}

fn tower<S: Scalar>(
    tape: &mut Tape<'_, S>,
    params: &Params<S>,
    idx: &TowerIdx,
    mut x: Var,
    segments: &Segments,
) -> Var {
    let heads = params.config.heads;
    for b in &idx.blocks {
        let (g, bb) = (tape.param(b.ln1_g), tape.param(b.ln1_b));
        let h = tape.layer_norm(x, g, bb);
        let (w, bias) = (tape.param(b.qkv_w), tape.param(b.qkv_b));
        let qkv = tape.linear(h, w, bias);
        let att = tape.attention(qkv, segments, heads);
        let (w, bias) = (tape.param(b.out_w), tape.param(b.out_b));
        let att = tape.linear(att, w, bias);
        x = tape.add(x, att);

        let (g, bb) = (tape.param(b.ln2_g), tape.param(b.ln2_b));
        let h = tape.layer_norm(x, g, bb);
        let (w, bias) = (tape.param(b.fc1_w), tape.param(b.fc1_b));
        let h = tape.linear(h, w, bias);
        let h = tape.gelu(h);
        let (w, bias) = (tape.param(b.fc2_w), tape.param(b.fc2_b));
        let h = tape.linear(h, w, bias);
        x = tape.add(x, h);
    }
    let (g, bb) = (tape.param(idx.ln_g), tape.param(idx.ln_b));
    let x = tape.layer_norm(x, g, bb);
    let pooled = tape.segment_mean(x, segments);
    let proj = tape.param(idx.proj);
    let y = tape.matmul(pooled, proj);
    tape.l2_normalize(y)
}

/// Records the image tower for a batch of pre-patchified images
/// (`count × num_patches` rows). Returns the `count×D` embedding node.
pub fn image_forward<S: Scalar>(
    tape: &mut Tape<'_, S>,
    params: &Params<S>,
    patches: Vec<S>,
    count: usize,
) -> Var {
    let c = &params.config;
    let np = c.num_patches();
    let l = &params.layout;
    let x = tape.input(count * np, c.patch_dim(), patches);
    let (w, b) = (tape.param(l.patch_w), tape.param(l.patch_b));
    let x = tape.linear(x, w, b);
    let pos = tape.param(l.image_pos);
    let positions: Vec<usize> = (0..count).flat_map(|_| 0..np).collect();
    let x = tape.add_positions(x, pos, &positions);
    let segments: Segments = Rc::new((0..count).map(|i| (i * np, np)).collect());
    tower(tape, params, &l.image, x, &segments)
}

/// Records the text tower for a batch of token sequences.
pub fn text_forward<S: Scalar>(
    tape: &mut Tape<'_, S>,
    params: &Params<S>,
    sequences: &[Vec<usize>],
) -> Var {
    let l = &params.layout;
    let ids: Vec<usize> = sequences.iter().flatten().copied().collect();
    let positions: Vec<usize> = sequences.iter().flat_map(|s| 0..s.len()).collect();
    let mut segments = Vec::with_capacity(sequences.len());
    let mut start = 0;
    for s in sequences {
        assert!(
            !s.is_empty() && s.len() <= params.config.max_tokens,
            "token sequence length {}",
            s.len()
        );
        segments.push((start, s.len()));
        start += s.len();
    }
    let table = tape.param(l.token);
    let x = tape.gather(table, &ids);
    let pos = tape.param(l.text_pos);
    let x = tape.add_positions(x, pos, &positions);
    tower(tape, params, &l.text, x, &Rc::new(segments))
}

fn rows(values: &[f32], dim: usize) -> Vec<Embedding> {
    values.chunks(dim).map(<[f32]>::to_vec).collect()
}

/// Inference entry points on an `f32` parameter snapshot.
impl Params<f32> {
    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        tokenize_with(text, self.config.vocab, self.config.max_tokens)
    }

    fn check_image(&self, bitmap: &Bitmap) -> Result<(), ModelError> {
        let side = self.config.image_size as u32;
        if bitmap.width() != side || bitmap.height() != side {
            return Err(ModelError::BadDimensions {
                expected: self.config.image_size,
                width: bitmap.width(),
                height: bitmap.height(),
            });
        }
        Ok(())
    }

    /// Embeds exact `image_size`-square bitmaps.
    pub fn encode_images(&self, bitmaps: &[&Bitmap]) -> Result<Vec<Embedding>, ModelError> {
        let c = &self.config;
        let mut patches = Vec::with_capacity(bitmaps.len() * c.num_patches() * c.patch_dim());
        for b in bitmaps {
            self.check_image(b)?;
            patches.extend(patchify(b.pixels(), c.image_size, c.patch));
        }
        if bitmaps.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new(self);
        let out = image_forward(&mut tape, self, patches, bitmaps.len());
        Ok(rows(tape.value(out), c.embed_dim))
    }

    pub fn encode_image(&self, bitmap: &Bitmap) -> Result<Embedding, ModelError> {
        Ok(self.encode_images(&[bitmap])?.remove(0))
    }

    pub fn encode_token_batch(&self, sequences: &[Vec<usize>]) -> Vec<Embedding> {
        if sequences.is_empty() {
            return Vec::new();
        }
        let mut tape = Tape::new(self);
        let out = text_forward(&mut tape, self, sequences);
        rows(tape.value(out), self.config.embed_dim)
    }

    pub fn encode_tokens(&self, tokens: &[usize]) -> Embedding {
        self.encode_token_batch(&[tokens.to_vec()]).remove(0)
    }

    pub fn encode_texts(&self, texts: &[&str]) -> Vec<Embedding> {
        let seqs: Vec<Vec<usize>> = texts.iter().map(|t| self.tokenize(t)).collect();
        self.encode_token_batch(&seqs)
    }

    pub fn encode_text(&self, text: &str) -> Embedding {
        self.encode_tokens(&self.tokenize(text))
    }
}

/// Dot product accumulated in `f64`.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Rescales to unit L2 norm (zero vectors are returned unchanged).
pub fn normalize(v: &[f64]) -> Embedding {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return v.iter().map(|&x| x as f32).collect();
    }
    v.iter().map(|&x| (x / n) as f32).collect()
}
