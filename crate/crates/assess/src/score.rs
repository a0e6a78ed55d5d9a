//! Window-averaged embeddings and everything scored from them.

use std::collections::BTreeMap;

use jitterlab_core::dataset::{
    build_description, well_designed_prompt, Choice, DatasetError, QualityTag,
};
use jitterlab_core::jitter::{CrapPrinciple, DefectTag};
use jitterlab_core::raster::Bitmap;
use jitterlab_model::{dot, normalize, Embedding, Model};
use serde::{Deserialize, Serialize};

use crate::windows::{plan_windows, WINDOW};
use crate::AssessError;

fn require_caption(caption: &str) -> Result<(), AssessError> {
    if caption.trim().is_empty() {
        Err(AssessError::EmptyCaption)
    } else {
        Ok(())
    }
}

fn description(
    quality: QualityTag,
    defects: &[DefectTag],
    caption: &str,
) -> Result<String, AssessError> {
    build_description(quality, defects, caption).map_err(|e| match e {
        DatasetError::EmptyCaption => AssessError::EmptyCaption,
        other => other.into(),
    })
}

/// Embeds a screenshot of any size: resize so the short side is 224, encode
/// every planned window, average, and renormalize.
pub fn embed_screenshot(model: &Model, bitmap: &Bitmap) -> Result<Embedding, AssessError> {
    let plan = plan_windows(bitmap.width(), bitmap.height());
    let resized = if (bitmap.width(), bitmap.height()) == (plan.resized_width, plan.resized_height)
    {
        bitmap.clone()
    } else {
        bitmap.resize(plan.resized_width, plan.resized_height)
    };
    let windows: Vec<Bitmap> = plan
        .offsets
        .iter()
        .map(|&o| {
            if plan.horizontal {
                resized.crop(o, 0, WINDOW, WINDOW)
            } else {
                resized.crop(0, o, WINDOW, WINDOW)
            }
        })
        .collect();
    let refs: Vec<&Bitmap> = windows.iter().collect();
    let embeddings = model.encode_images(&refs)?;
    if embeddings.len() == 1 {
        return Ok(embeddings.into_iter().next().expect("one window"));
    }
    let mut mean = vec![0.0f64; embeddings[0].len()];
    for e in &embeddings {
        for (m, &v) in mean.iter_mut().zip(e) {
            *m += v as f64;
        }
    }
    let n = embeddings.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(normalize(&mean))
}

/// `exp(τ)·⟨image, text⟩` for an already-embedded screenshot.
pub fn score_embedding(model: &Model, image: &[f32], text: &[f32]) -> f64 {
    model.logit_scale() * dot(image, text)
}

/// Design score of a screenshot against the well-designed prompt for `caption`.
pub fn design_score(model: &Model, bitmap: &Bitmap, caption: &str) -> Result<f64, AssessError> {
    require_caption(caption)?;
    let text = model.encode_text(&well_designed_prompt(caption)?);
    Ok(score_embedding(
        model,
        &embed_screenshot(model, bitmap)?,
        &text,
    ))
}

/// The better-scoring of two screenshots; bit-equal scores pick `A`.
pub fn choose_better(
    model: &Model,
    a: &Bitmap,
    b: &Bitmap,
    caption: &str,
) -> Result<Choice, AssessError> {
    let sa = design_score(model, a, caption)?;
    let sb = design_score(model, b, caption)?;
    Ok(if sb > sa { Choice::B } else { Choice::A })
}

/// Candidate indices in descending score order; equal scores keep input order.
pub fn rank_candidates(
    model: &Model,
    bitmaps: &[&Bitmap],
    caption: &str,
) -> Result<Vec<usize>, AssessError> {
    require_caption(caption)?;
    if bitmaps.is_empty() {
        return Err(AssessError::InvalidArgument(
            "at least one candidate is required".into(),
        ));
    }
    let text = model.encode_text(&well_designed_prompt(caption)?);
    let scores = bitmaps
        .iter()
        .map(|b| Ok(score_embedding(model, &embed_screenshot(model, b)?, &text)))
        .collect::<Result<Vec<f64>, AssessError>>()?;
    let mut order: Vec<usize> = (0..bitmaps.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    Ok(order)
}

/// Whether suggestions are reported as raw tags or projected onto the four
/// CRAP principle tags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuggestMode {
    #[default]
    AllTags,
    CrapOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub tag: DefectTag,
    pub score: f64,
}

/// Projects surfaced tags onto CRAP principle tags; each principle takes the
/// highest score among the tags mapping to it. Descending by score.
pub fn project_to_crap(suggestions: &[Suggestion]) -> Vec<Suggestion> {
    let mut best: BTreeMap<CrapPrinciple, f64> = BTreeMap::new();
    for s in suggestions {
        for &p in s.tag.principles() {
            let e = best.entry(p).or_insert(f64::NEG_INFINITY);
            *e = e.max(s.score);
        }
    }
    let mut out: Vec<Suggestion> = best
        .into_iter()
        .map(|(p, score)| Suggestion {
            tag: p.defect_tag(),
            score,
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

/// Defect tags whose "poor design. <tag>." description fits the screenshot
/// better than the tag-free "poor design." description. Returns the
/// threshold score and the surfaced tags, descending.
pub fn suggest_defects(
    model: &Model,
    bitmap: &Bitmap,
    caption: &str,
    candidates: &[DefectTag],
    mode: SuggestMode,
) -> Result<(f64, Vec<Suggestion>), AssessError> {
    require_caption(caption)?;
    suggest_for_embedding(
        model,
        &embed_screenshot(model, bitmap)?,
        caption,
        candidates,
        mode,
    )
}

/// [`suggest_defects`] for an already-embedded screenshot.
pub fn suggest_for_embedding(
    model: &Model,
    image: &[f32],
    caption: &str,
    candidates: &[DefectTag],
    mode: SuggestMode,
) -> Result<(f64, Vec<Suggestion>), AssessError> {
    require_caption(caption)?;
    let mut texts = vec![description(QualityTag::PoorDesign, &[], caption)?];
    for &tag in candidates {
        texts.push(description(QualityTag::PoorDesign, &[tag], caption)?);
    }
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let embedded = model.encode_texts(&refs);
    let threshold = score_embedding(model, image, &embedded[0]);
    let mut surfaced: Vec<Suggestion> = candidates
        .iter()
        .zip(&embedded[1..])
        .map(|(&tag, t)| Suggestion {
            tag,
            score: score_embedding(model, image, t),
        })
        .filter(|s| s.score > threshold)
        .collect();
    surfaced.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(match mode {
        SuggestMode::AllTags => (threshold, surfaced),
        SuggestMode::CrapOnly => (threshold, project_to_crap(&surfaced)),
    })
}
