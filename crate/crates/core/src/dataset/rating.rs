//! Turning a human A/B judgement into a preference pair and two described samples.

use serde::{Deserialize, Serialize};

use super::{Choice, DatasetError, PreferencePair, QualityTag, UISample};
use crate::jitter::CrapPrinciple;

/// A pair waiting to be rated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDraft {
    pub pair_id: String,
    pub a: UISample,
    pub b: UISample,
    #[serde(default)]
    pub cluster_id: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingSubmission {
    pub caption: String,
    pub choice: Choice,
    #[serde(default)]
    pub principles: Vec<CrapPrinciple>,
    #[serde(default)]
    pub irrelevant: bool,
    #[serde(default)]
    pub note: Option<String>,
}

impl RatingSubmission {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.caption.trim().is_empty() {
            return Err(DatasetError::Validation("caption must not be empty".into()));
        }
        if self.choice == Choice::Same && !self.principles.is_empty() {
            return Err(DatasetError::Validation(
                "principles must be empty when the choice is `same`".into(),
            ));
        }
        let mut seen = self.principles.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.principles.len() {
            return Err(DatasetError::Validation(
                "principles must not repeat".into(),
            ));
        }
        Ok(())
    }
}

fn rated_copy(base: &UISample, id: String, caption: &str) -> UISample {
    UISample {
        id,
        caption: caption.to_string(),
        quality: QualityTag::None,
        defects: vec![],
        origin_id: base.id.clone(),
        ..base.clone()
    }
}

/// Applies the description rules: the preferred side becomes well-designed,
/// the other side poor design plus one `bad <principle>` per selected
/// principle; ties leave both without a quality tag. Both sides take the
/// submitted caption.
///
/// Rated samples are new records derived from the draft's samples (their
/// `origin_id` points back), so repeated ratings of one screenshot coexist.
pub fn ingest_rating(
    draft: &PairDraft,
    submission: &RatingSubmission,
    rater_id: Option<&str>,
) -> Result<(PreferencePair, UISample, UISample), DatasetError> {
    submission.validate()?;
    if draft.a.id == draft.b.id {
        return Err(DatasetError::Validation(
            "a pair needs two distinct samples".into(),
        ));
    }
    let caption = submission
        .caption
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    let pair_id = format!("{}@{}", draft.pair_id, rater_id.unwrap_or("anon"));
    let mut a = rated_copy(&draft.a, format!("{pair_id}:a"), &caption);
    let mut b = rated_copy(&draft.b, format!("{pair_id}:b"), &caption);
    let mut principles = submission.principles.clone();
    principles.sort();
    let defects: Vec<_> = principles.iter().map(|p| p.defect_tag()).collect();
    let (better, worse) = match submission.choice {
        Choice::A => (Some(&mut a), Some(&mut b)),
        Choice::B => (Some(&mut b), Some(&mut a)),
        Choice::Same => (None, None),
    };
    if let Some(better) = better {
        better.quality = QualityTag::WellDesigned;
    }
    if let Some(worse) = worse {
        worse.quality = QualityTag::PoorDesign;
        worse.defects = defects;
    }
    let pair = PreferencePair {
        pair_id,
        a: a.id.clone(),
        b: b.id.clone(),
        preferred: submission.choice,
        principles,
        caption,
        rater_id: rater_id.map(str::to_string),
        cluster_id: draft.cluster_id,
        split: draft.a.split,
        irrelevant: submission.irrelevant,
        note: submission.note.clone().filter(|n| !n.trim().is_empty()),
    };
    Ok((pair, a, b))
}
