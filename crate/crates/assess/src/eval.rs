//! Evaluation metrics and report files.
//!
//! * design-choice accuracy over strict-preference pairs, per source group;
//! * macro-F1 of CRAP-principle suggestions, with a choice-adjusted variant
//!   that discards suggestions whenever the pair choice was wrong;
//! * retrieval MRR of descriptions against screenshots.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use jitterlab_core::dataset::{Choice, PreferencePair};
use jitterlab_core::jitter::CrapPrinciple;
use jitterlab_core::seed::{fnv1a, mix_seed, seeded_rng};
use jitterlab_model::{dot, normalize, Embedding};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::AssessError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl GroupAccuracy {
    fn add(&mut self, hit: bool) {
        self.total += 1;
        self.correct += hit as usize;
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChoiceAccuracy {
    pub overall: GroupAccuracy,
    pub groups: BTreeMap<String, GroupAccuracy>,
}

/// Fraction of strict-preference pairs where `chooser` agrees with the
/// recorded preference, overall and per `group_of` label. Ties are skipped.
pub fn design_choice_accuracy(
    pairs: &[PreferencePair],
    group_of: impl Fn(&PreferencePair) -> String,
    mut chooser: impl FnMut(&PreferencePair) -> Result<Choice, AssessError>,
) -> Result<ChoiceAccuracy, AssessError> {
    let mut out = ChoiceAccuracy::default();
    for p in pairs.iter().filter(|p| p.preferred != Choice::Same) {
        let hit = chooser(p)? == p.preferred;
        out.overall.add(hit);
        out.groups.entry(group_of(p)).or_default().add(hit);
    }
    if out.overall.total == 0 {
        return Err(AssessError::NoPairs);
    }
    Ok(out)
}

/// Default source grouping: rated pairs versus synthetic pairs.
pub fn pair_source(pair: &PreferencePair) -> String {
    if pair.rater_id.is_some() {
        "human-pair"
    } else {
        "synthetic-pair"
    }
    .to_string()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrincipleScores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrincipleScores {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PrincipleScores {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuggestionScores {
    pub pairs_used: usize,
    pub macro_f1: f64,
    pub macro_recall: f64,
    pub adjusted_macro_f1: f64,
    pub adjusted_macro_recall: f64,
    pub per_principle: BTreeMap<CrapPrinciple, PrincipleScores>,
    pub adjusted_per_principle: BTreeMap<CrapPrinciple, PrincipleScores>,
}

fn per_principle<'a>(
    items: impl Iterator<Item = (&'a BTreeSet<CrapPrinciple>, &'a BTreeSet<CrapPrinciple>)> + Clone,
) -> BTreeMap<CrapPrinciple, PrincipleScores> {
    CrapPrinciple::ALL
        .iter()
        .map(|&p| {
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for (pred, gold) in items.clone() {
                match (pred.contains(&p), gold.contains(&p)) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            (p, PrincipleScores::from_counts(tp, fp, fn_))
        })
        .collect()
}

fn macro_of(
    scores: &BTreeMap<CrapPrinciple, PrincipleScores>,
    f: impl Fn(&PrincipleScores) -> f64,
) -> f64 {
    scores.values().map(f).sum::<f64>() / scores.len() as f64
}

/// Macro-averaged F1 over the four principles, on pairs with non-empty gold
/// sets. With `choice_correct`, the adjusted variant replaces predictions
/// by the empty set wherever the choice was wrong.
pub fn suggestion_f1(
    predicted: &[BTreeSet<CrapPrinciple>],
    gold: &[BTreeSet<CrapPrinciple>],
    choice_correct: Option<&[bool]>,
) -> Result<SuggestionScores, AssessError> {
    if predicted.len() != gold.len() || choice_correct.is_some_and(|c| c.len() != gold.len()) {
        return Err(AssessError::ShapeMismatch(format!(
            "{} predictions, {} gold sets, {} choice flags",
            predicted.len(),
            gold.len(),
            choice_correct.map_or(gold.len(), <[bool]>::len)
        )));
    }
    let empty = BTreeSet::new();
    let kept: Vec<usize> = (0..gold.len()).filter(|&i| !gold[i].is_empty()).collect();
    let raw = per_principle(kept.iter().map(|&i| (&predicted[i], &gold[i])));
    let adjusted = per_principle(kept.iter().map(|&i| {
        let ok = choice_correct.map_or(true, |c| c[i]);
        (if ok { &predicted[i] } else { &empty }, &gold[i])
    }));
    Ok(SuggestionScores {
        pairs_used: kept.len(),
        macro_f1: macro_of(&raw, |s| s.f1),
        macro_recall: macro_of(&raw, |s| s.recall),
        adjusted_macro_f1: macro_of(&adjusted, |s| s.f1),
        adjusted_macro_recall: macro_of(&adjusted, |s| s.recall),
        per_principle: raw,
        adjusted_per_principle: adjusted,
    })
}

/// One retrieval candidate: a screenshot embedding and its description.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalItem {
    pub id: String,
    pub description: String,
    pub image: Embedding,
}

/// 1-based rank of the first screenshot whose description equals
/// `description`, ranking by descending similarity to `query` with ties
/// broken by id.
pub fn first_match_rank(
    items: &[RetrievalItem],
    query: &[f32],
    description: &str,
) -> Option<usize> {
    let mut scored: Vec<(f64, &RetrievalItem)> =
        items.iter().map(|it| (dot(&it.image, query), it)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    scored
        .iter()
        .position(|(_, it)| it.description == description)
        .map(|r| r + 1)
}

/// Mean reciprocal rank: every distinct description is a query; its
/// reciprocal rank is that of the first screenshot sharing the description.
pub fn retrieval_mrr(
    items: &[RetrievalItem],
    mut embed_text: impl FnMut(&str) -> Embedding,
) -> Result<f64, AssessError> {
    if items.len() < 2 {
        return Err(AssessError::NoSamples);
    }
    let queries: BTreeSet<&str> = items.iter().map(|it| it.description.as_str()).collect();
    let total: f64 = queries
        .iter()
        .map(|&d| {
            let rank =
                first_match_rank(items, &embed_text(d), d).expect("the query's own item matches");
            1.0 / rank as f64
        })
        .sum();
    Ok(total / queries.len() as f64)
}

/// A seeded random unit vector derived from `key` — the chance-level
/// embedder used as a retrieval baseline.
pub fn random_embedding(key: &str, dim: usize, seed: u64) -> Embedding {
    let mut rng = seeded_rng(mix_seed(seed, fnv1a(key.as_bytes())));
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&v)
}

/// MRR of random embeddings (images keyed by id, texts by description),
/// averaged over `trials` seeds.
pub fn random_baseline_mrr(
    items: &[RetrievalItem],
    dim: usize,
    trials: u64,
) -> Result<f64, AssessError> {
    let mut sum = 0.0;
    for t in 0..trials {
        let randomized: Vec<RetrievalItem> = items
            .iter()
            .map(|it| RetrievalItem {
                image: random_embedding(&format!("image:{}", it.id), dim, t),
                ..it.clone()
            })
            .collect();
        sum += retrieval_mrr(&randomized, |d| {
            random_embedding(&format!("text:{d}"), dim, t)
        })?;
    }
    Ok(sum / trials as f64)
}

/// Metrics for one model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<ChoiceAccuracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<SuggestionScores>,
    /// MRR per dataset name.
    #[serde(default)]
    pub mrr: BTreeMap<String, f64>,
    #[serde(default)]
    pub counts: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub models: Vec<ModelEval>,
    /// Free-form echo of the configuration that produced the report.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl EvalReport {
    /// Plain-text table: one row per model with choice accuracy, suggestion
    /// macro-F1 (plain / choice-adjusted) and one MRR column per dataset.
    pub fn table(&self) -> String {
        let datasets: BTreeSet<&str> = self
            .models
            .iter()
            .flat_map(|m| m.mrr.keys().map(String::as_str))
            .collect();
        let width = self
            .models
            .iter()
            .map(|m| m.model.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let cell = |out: &mut String, v: Option<f64>| {
            let _ = match v {
                Some(v) => write!(out, "  {v:>12.4}"),
                None => write!(out, "  {:>12}", "-"),
            };
        };
        let mut out = format!("{:<width$}", "model");
        for h in ["accuracy", "F1", "adjusted F1"] {
            let _ = write!(out, "  {h:>12}");
        }
        for d in &datasets {
            let _ = write!(out, "  {:>12}", format!("MRR {d}"));
        }
        out.push('\n');
        for m in &self.models {
            let _ = write!(out, "{:<width$}", m.model);
            cell(&mut out, m.choice.as_ref().map(|c| c.overall.accuracy));
            cell(&mut out, m.suggestion.as_ref().map(|s| s.macro_f1));
            cell(&mut out, m.suggestion.as_ref().map(|s| s.adjusted_macro_f1));
            for d in &datasets {
                cell(&mut out, m.mrr.get(*d).copied());
            }
            out.push('\n');
        }
        out
    }
}

/// Writes the JSON report to `path` and the text table next to it (same
/// path with a `.txt` extension). Returns the table path.
pub fn emit_report(report: &EvalReport, path: &Path) -> Result<PathBuf, AssessError> {
    let json = serde_json::to_string_pretty(report).expect("reports serialize");
    fs::write(path, json).map_err(|e| AssessError::io(path, e))?;
    let table_path = path.with_extension("txt");
    fs::write(&table_path, report.table()).map_err(|e| AssessError::io(&table_path, e))?;
    Ok(table_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_over_zero_is_zero() {
        let s = PrincipleScores::from_counts(0, 0, 0);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }
}
