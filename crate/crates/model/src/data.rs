//! Training views over a forged dataset directory.
//!
//! Screenshots are decoded once and stored with their short side already
//! scaled to the model's input size; per-step preprocessing is then just a
//! square crop along the long axis.

use std::collections::BTreeMap;
use std::path::Path;

use jitterlab_core::dataset::{
    read_jsonl, well_designed_prompt, ForgeLayout, PreferencePair, Split, UISample,
};
use jitterlab_core::raster::Bitmap;

use crate::ModelError;

/// Scales `bitmap` so its smaller side equals `side`, preserving aspect.
pub fn resize_short_side(bitmap: &Bitmap, side: u32) -> Bitmap {
    let (w, h) = (bitmap.width(), bitmap.height());
    let (nw, nh) = if w <= h {
        (
            side,
            ((h as f64 * side as f64 / w as f64).round() as u32).max(side),
        )
    } else {
        (
            ((w as f64 * side as f64 / h as f64).round() as u32).max(side),
            side,
        )
    };
    if (nw, nh) == (w, h) {
        return bitmap.clone();
    }
    bitmap.resize(nw, nh)
}

/// The `side`-square window at fraction `frac ∈ [0,1]` along the long axis of
/// a bitmap whose short side is already `side`.
pub fn square_crop(bitmap: &Bitmap, side: u32, frac: f64) -> Bitmap {
    let (w, h) = (bitmap.width(), bitmap.height());
    if w == side && h == side {
        return bitmap.clone();
    }
    let frac = frac.clamp(0.0, 1.0);
    if w >= h {
        let x = ((w - side) as f64 * frac).round() as u32;
        bitmap.crop(x, 0, side, side)
    } else {
        let y = ((h - side) as f64 * frac).round() as u32;
        bitmap.crop(0, y, side, side)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastiveItem {
    pub image: usize,
    pub description: String,
}

/// A strict preference: `better` should outscore `worse` against `prompt`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairItem {
    pub better: usize,
    pub worse: usize,
    pub prompt: String,
}

/// Images plus the two training views over them. Image indices refer to
/// `images`, whose short sides equal the model input size.
#[derive(Clone, Debug, Default)]
pub struct DatasetView {
    pub images: Vec<Bitmap>,
    pub ids: Vec<String>,
    pub contrastive: Vec<ContrastiveItem>,
    pub pairs: Vec<PairItem>,
}

impl DatasetView {
    /// Builds both views from sample and pair records. Samples belonging
    /// only to pairs flagged irrelevant are dropped; tie pairs appear only in
    /// the contrastive view.
    pub fn from_records(
        samples: &[UISample],
        pairs: &[PreferencePair],
        split: Option<Split>,
        side: u32,
        mut load: impl FnMut(&UISample) -> Result<Bitmap, ModelError>,
    ) -> Result<Self, ModelError> {
        let in_split = |s: Split| split.map_or(true, |want| want == s);
        let mut excluded = std::collections::BTreeSet::new();
        for p in pairs.iter().filter(|p| p.irrelevant) {
            excluded.insert(p.a.as_str());
            excluded.insert(p.b.as_str());
        }
        let mut view = DatasetView::default();
        let mut index = BTreeMap::new();
        for s in samples
            .iter()
            .filter(|s| in_split(s.split) && !excluded.contains(s.id.as_str()))
        {
            let bitmap = resize_short_side(&load(s)?, side);
            index.insert(s.id.as_str(), view.images.len());
            view.contrastive.push(ContrastiveItem {
                image: view.images.len(),
                description: s.description()?,
            });
            view.images.push(bitmap);
            view.ids.push(s.id.clone());
        }
        for p in pairs.iter().filter(|p| in_split(p.split) && !p.irrelevant) {
            let Some((better, worse)) = p.ordered() else {
                continue;
            };
            let (Some(&b), Some(&w)) = (index.get(better), index.get(worse)) else {
                continue;
            };
            view.pairs.push(PairItem {
                better: b,
                worse: w,
                prompt: well_designed_prompt(&p.caption)?,
            });
        }
        Ok(view)
    }

    /// Loads `samples.jsonl` / `pairs.jsonl` and the images of a forged directory.
    pub fn load(dir: &Path, split: Option<Split>, side: u32) -> Result<Self, ModelError> {
        let layout = ForgeLayout::new(dir);
        let samples: Vec<UISample> = read_jsonl(&layout.samples())?;
        let pairs: Vec<PreferencePair> = read_jsonl(&layout.pairs())?;
        Self::from_records(&samples, &pairs, split, side, |s| {
            Bitmap::read_png(&layout.image_path(&s.image)).map_err(ModelError::from)
        })
    }
}
