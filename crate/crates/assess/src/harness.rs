//! Runs the evaluation metrics of [`crate::eval`] for a model over a forged
//! or rated dataset directory.
//!
//! Every screenshot is embedded once (sliding windows) and reused by all
//! tasks. Suggestion gold labels are the rater-selected principles; for
//! synthetic pairs, which carry none, they are the CRAP projection of the
//! non-preferred sample's injected defect tags.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use jitterlab_core::dataset::{
    read_jsonl, well_designed_prompt, Choice, ForgeLayout, PreferencePair, Split, UISample,
};
use jitterlab_core::jitter::{CrapPrinciple, DefectTag};
use jitterlab_core::raster::Bitmap;
use jitterlab_model::{Embedding, Model};

use crate::eval::{
    design_choice_accuracy, pair_source, random_baseline_mrr, retrieval_mrr, suggestion_f1,
    ModelEval, RetrievalItem,
};
use crate::score::{embed_screenshot, score_embedding, suggest_for_embedding, SuggestMode};
use crate::AssessError;

/// Name of the random-embedding baseline row in reports.
pub const RANDOM_BASELINE: &str = "random-embedding";
/// Seeds averaged by the random baseline.
pub const BASELINE_TRIALS: u64 = 5;

/// Which metrics to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalTasks {
    pub choice: bool,
    pub suggest: bool,
    pub mrr: bool,
}

impl Default for EvalTasks {
    fn default() -> Self {
        EvalTasks {
            choice: true,
            suggest: true,
            mrr: true,
        }
    }
}

impl FromStr for EvalTasks {
    type Err = String;

    /// Comma-separated subset of `choice`, `suggest`, `mrr`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut t = EvalTasks {
            choice: false,
            suggest: false,
            mrr: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "choice" => t.choice = true,
                "suggest" => t.suggest = true,
                "mrr" => t.mrr = true,
                other => {
                    return Err(format!(
                        "unknown task `{other}` (expected choice, suggest, mrr)"
                    ))
                }
            }
        }
        if t == (EvalTasks {
            choice: false,
            suggest: false,
            mrr: false,
        }) {
            return Err("no tasks given".into());
        }
        Ok(t)
    }
}

impl fmt::Display for EvalTasks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.choice, "choice"),
            (self.suggest, "suggest"),
            (self.mrr, "mrr"),
        ]
        .into_iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| n)
        .collect();
        f.write_str(&names.join(","))
    }
}

/// Samples and pairs of one dataset, restricted to a split.
#[derive(Clone, Debug)]
pub struct EvalDataset {
    pub name: String,
    pub root: PathBuf,
    pub samples: BTreeMap<String, UISample>,
    /// Pairs whose two samples are both present, excluding irrelevant ones.
    pub pairs: Vec<PreferencePair>,
}

impl EvalDataset {
    /// Loads `dir`'s manifests (or `pairs_file` instead of `pairs.jsonl`),
    /// keeping only `split` when given.
    pub fn load(
        dir: &Path,
        pairs_file: Option<&Path>,
        split: Option<Split>,
    ) -> Result<Self, AssessError> {
        let layout = ForgeLayout::new(dir);
        if !layout.samples().is_file() {
            return Err(AssessError::io(
                &layout.samples(),
                std::io::ErrorKind::NotFound.into(),
            ));
        }
        let pairs_path = pairs_file.map_or_else(|| layout.pairs(), Path::to_path_buf);
        let samples: Vec<UISample> = read_jsonl(&layout.samples())?;
        let pairs: Vec<PreferencePair> = read_jsonl(&pairs_path)?;
        let name = dir.file_name().map_or_else(
            || "dataset".to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        Ok(Self::from_records(name, dir, samples, pairs, split))
    }

    pub fn from_records(
        name: impl Into<String>,
        root: &Path,
        samples: Vec<UISample>,
        pairs: Vec<PreferencePair>,
        split: Option<Split>,
    ) -> Self {
        let keep = |s: Split| split.map_or(true, |w| w == s);
        let samples: BTreeMap<String, UISample> = samples
            .into_iter()
            .filter(|s| keep(s.split))
            .map(|s| (s.id.clone(), s))
            .collect();
        let pairs = pairs
            .into_iter()
            .filter(|p| {
                keep(p.split)
                    && !p.irrelevant
                    && samples.contains_key(&p.a)
                    && samples.contains_key(&p.b)
            })
            .collect();
        EvalDataset {
            name: name.into(),
            root: root.to_path_buf(),
            samples,
            pairs,
        }
    }

    fn bitmap(&self, id: &str) -> Result<Bitmap, AssessError> {
        let s = &self.samples[id];
        Ok(Bitmap::read_png(
            &ForgeLayout::new(&self.root).image_path(&s.image),
        )?)
    }

    /// Gold principles of a strict pair (see the module docs).
    pub fn gold_principles(&self, pair: &PreferencePair) -> BTreeSet<CrapPrinciple> {
        if !pair.principles.is_empty() {
            return pair.principles.iter().copied().collect();
        }
        let Some((_, worse)) = pair.ordered() else {
            return BTreeSet::new();
        };
        self.samples[worse]
            .defects
            .iter()
            .flat_map(|t| t.principles().iter().copied())
            .collect()
    }

    /// Retrieval items: the preferred screenshot of every strict pair, with
    /// its well-designed description.
    fn retrieval_items(
        &self,
        embeddings: &BTreeMap<String, Embedding>,
    ) -> Result<Vec<RetrievalItem>, AssessError> {
        let better: BTreeSet<&str> = self
            .pairs
            .iter()
            .filter_map(|p| p.ordered().map(|(b, _)| b))
            .collect();
        better
            .into_iter()
            .map(|id| {
                Ok(RetrievalItem {
                    id: id.to_string(),
                    description: well_designed_prompt(&self.samples[id].caption)?,
                    image: embeddings[id].clone(),
                })
            })
            .collect()
    }
}

/// Embeds every screenshot referenced by the dataset's pairs.
pub fn embed_pairs(
    model: &Model,
    data: &EvalDataset,
) -> Result<BTreeMap<String, Embedding>, AssessError> {
    let ids: BTreeSet<&str> = data
        .pairs
        .iter()
        .flat_map(|p| [p.a.as_str(), p.b.as_str()])
        .collect();
    ids.into_iter()
        .map(|id| Ok((id.to_string(), embed_screenshot(model, &data.bitmap(id)?)?)))
        .collect()
}

/// Computes the requested metrics for one model.
pub fn evaluate(
    model_name: &str,
    model: &Model,
    data: &EvalDataset,
    tasks: EvalTasks,
) -> Result<ModelEval, AssessError> {
    let embeddings = embed_pairs(model, data)?;
    let mut out = ModelEval {
        model: model_name.to_string(),
        ..Default::default()
    };
    let strict: Vec<&PreferencePair> = data
        .pairs
        .iter()
        .filter(|p| p.preferred != Choice::Same)
        .collect();
    out.counts.insert("pairs".into(), data.pairs.len());
    out.counts.insert("strict_pairs".into(), strict.len());

    let mut prompt_cache: BTreeMap<String, Embedding> = BTreeMap::new();
    let mut choices: BTreeMap<String, Choice> = BTreeMap::new();
    for p in &strict {
        let prompt = well_designed_prompt(&p.caption)?;
        let t = prompt_cache
            .entry(prompt.clone())
            .or_insert_with(|| model.encode_text(&prompt));
        let sa = score_embedding(model, &embeddings[&p.a], t);
        let sb = score_embedding(model, &embeddings[&p.b], t);
        choices.insert(
            p.pair_id.clone(),
            if sb > sa { Choice::B } else { Choice::A },
        );
    }
    if tasks.choice {
        out.choice = Some(design_choice_accuracy(&data.pairs, pair_source, |p| {
            Ok(choices[&p.pair_id])
        })?);
    }
    if tasks.suggest {
        let (mut predicted, mut gold, mut correct) = (Vec::new(), Vec::new(), Vec::new());
        for p in &strict {
            let g = data.gold_principles(p);
            if g.is_empty() {
                continue;
            }
            let (_, worse) = p.ordered().expect("strict pair");
            let (_, s) = suggest_for_embedding(
                model,
                &embeddings[worse],
                &p.caption,
                &DefectTag::ALL,
                SuggestMode::CrapOnly,
            )?;
            predicted.push(
                s.iter()
                    .flat_map(|x| x.tag.principles().iter().copied())
                    .collect(),
            );
            gold.push(g);
            correct.push(choices[&p.pair_id] == p.preferred);
        }
        out.counts.insert("suggestion_pairs".into(), gold.len());
        if !gold.is_empty() {
            out.suggestion = Some(suggestion_f1(&predicted, &gold, Some(&correct))?);
        }
    }
    if tasks.mrr {
        let items = data.retrieval_items(&embeddings)?;
        out.counts.insert("retrieval_items".into(), items.len());
        out.mrr.insert(
            data.name.clone(),
            retrieval_mrr(&items, |d| model.encode_text(d))?,
        );
    }
    Ok(out)
}

/// The random-embedding MRR row for `data` (embedding width `dim`).
pub fn baseline(data: &EvalDataset, dim: usize) -> Result<ModelEval, AssessError> {
    let zeros: BTreeMap<String, Embedding> = data
        .pairs
        .iter()
        .flat_map(|p| [p.a.clone(), p.b.clone()])
        .map(|id| (id, vec![0.0; dim]))
        .collect();
    let items = data.retrieval_items(&zeros)?;
    let mut out = ModelEval {
        model: RANDOM_BASELINE.into(),
        ..Default::default()
    };
    out.counts.insert("retrieval_items".into(), items.len());
    out.mrr.insert(
        data.name.clone(),
        random_baseline_mrr(&items, dim, BASELINE_TRIALS)?,
    );
    Ok(out)
}
