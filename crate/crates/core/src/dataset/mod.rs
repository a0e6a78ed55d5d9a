//! Dataset records, description grammar, and the forging pipeline.
//!
//! Samples and pairs are stored as JSON Lines manifests (`samples.jsonl`,
//! `pairs.jsonl`); everything downstream (training, evaluation, the rating
//! service) reads those files rather than calling back into the forge.

mod alpha;
mod cluster;
mod io;
mod rating;
mod split;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::Device;
use crate::jitter::{CrapPrinciple, DefectTag};

pub use alpha::krippendorff_alpha;
pub use cluster::{
    cluster_by_caption, cosine_distance, dbscan, CaptionEmbedder, ClusterAssignment,
    HashedTfEmbedder, DEFAULT_EPSILON, DEFAULT_MIN_SAMPLES,
};
pub use io::{
    append_jsonl, read_jsonl, write_jsonl, ForgeLayout, CLUSTERS_FILE, PAIRS_FILE, PLANS_FILE,
    SAMPLES_FILE,
};
pub use rating::{ingest_rating, PairDraft, RatingSubmission};
pub use split::{assign_splits, SplitKey, SplitRatios};
pub use synth::{
    caption_for, load_corpus, synthesize_corpus, CorpusEntry, ForgeOptions, ForgeOutput,
    PlanRecord, CORPUS_MANIFEST, DEFAULT_VARIANTS,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("caption must not be empty")]
    EmptyCaption,
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("at least two raters with a commonly rated pair are required")]
    InsufficientRaters,
    #[error("no corpus page could be forged")]
    NoPagesSucceeded,
    #[error("{path}:{line}: {message}")]
    Json {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QualityTag {
    #[serde(rename = "well-designed")]
    WellDesigned,
    #[serde(rename = "poor design")]
    PoorDesign,
    #[serde(rename = "none")]
    None,
}

impl QualityTag {
    pub fn as_str(self) -> &'static str {
        match self {
            QualityTag::WellDesigned => "well-designed",
            QualityTag::PoorDesign => "poor design",
            QualityTag::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    Real,
    Generated,
}

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub const ASSIGNED: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which side of a pair a rater preferred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
    #[serde(rename = "same")]
    Same,
}

impl FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Choice::A),
            "B" | "b" => Ok(Choice::B),
            "same" => Ok(Choice::Same),
            other => Err(format!("unknown choice `{other}`")),
        }
    }
}

/// One screenshot with its description components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UISample {
    pub id: String,
    /// Image path, relative to the dataset directory.
    pub image: String,
    pub caption: String,
    pub quality: QualityTag,
    pub defects: Vec<DefectTag>,
    pub source: Source,
    pub device: Device,
    /// Id of the un-jittered (or un-rated) ancestor; equal to `id` for originals.
    pub origin_id: String,
    /// Grouping key for splits: the page url, or a cluster key for rated data.
    pub key: String,
    #[serde(default)]
    pub split: Split,
}

impl UISample {
    pub fn is_original(&self) -> bool {
        self.origin_id == self.id
    }

    pub fn description(&self) -> Result<String, DatasetError> {
        build_description(self.quality, &self.defects, &self.caption)
    }
}

/// A two-way comparison between samples `a` and `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub pair_id: String,
    pub a: String,
    pub b: String,
    pub preferred: Choice,
    pub principles: Vec<CrapPrinciple>,
    pub caption: String,
    pub rater_id: Option<String>,
    pub cluster_id: Option<u64>,
    #[serde(default)]
    pub split: Split,
    /// Rater flagged the screenshots as not matching the caption.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub irrelevant: bool,
    /// Free-text reason; stored but unused by training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PreferencePair {
    /// `(better, worse)` sample ids, or `None` for ties.
    pub fn ordered(&self) -> Option<(&str, &str)> {
        match self.preferred {
            Choice::A => Some((&self.a, &self.b)),
            Choice::B => Some((&self.b, &self.a)),
            Choice::Same => None,
        }
    }
}

/// Assembles `ui screenshot.[ <quality>.][ <defect>.]* <caption>`, with the
/// caption's whitespace collapsed to single spaces.
pub fn build_description(
    quality: QualityTag,
    defects: &[DefectTag],
    caption: &str,
) -> Result<String, DatasetError> {
    let caption = caption.split_whitespace().collect::<Vec<_>>().join(" ");
    if caption.is_empty() {
        return Err(DatasetError::EmptyCaption);
    }
    let mut out = String::from("ui screenshot.");
    if quality != QualityTag::None {
        out.push(' ');
        out.push_str(quality.as_str());
        out.push('.');
    }
    for d in defects {
        out.push(' ');
        out.push_str(d.phrase());
        out.push('.');
    }
    out.push(' ');
    out.push_str(&caption);
    Ok(out)
}

/// The positive prompt used for pairwise training and scoring.
pub fn well_designed_prompt(caption: &str) -> Result<String, DatasetError> {
    build_description(QualityTag::WellDesigned, &[], caption)
}
