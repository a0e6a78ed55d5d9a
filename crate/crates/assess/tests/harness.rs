use std::collections::BTreeSet;
use std::path::Path;

use jitterlab_assess::harness::{baseline, evaluate, EvalDataset, EvalTasks, RANDOM_BASELINE};
use jitterlab_assess::{design_score, suggest_defects, SuggestMode};
use jitterlab_core::dataset::{
    assign_splits, read_jsonl, synthesize_corpus, Choice, ForgeLayout, ForgeOptions,
    PreferencePair, QualityTag, Source, Split, SplitKey, SplitRatios, UISample,
};
use jitterlab_core::doc::Device;
use jitterlab_core::fixtures::write_fixture_corpus;
use jitterlab_core::jitter::{CrapPrinciple, DefectTag};
use jitterlab_core::raster::Bitmap;
use jitterlab_model::{Model, ModelConfig};

fn forged(dir: &Path) -> std::path::PathBuf {
    let corpus = dir.join("corpus");
    let out = dir.join("forged");
    write_fixture_corpus(&corpus, 4, 3).unwrap();
    synthesize_corpus(
        &corpus,
        &out,
        &ForgeOptions {
            variants_per_page: 2,
            seed: 3,
            renderer: None,
        },
    )
    .unwrap();
    out
}

#[test]
fn task_lists_parse_and_print() {
    let t: EvalTasks = "choice,mrr".parse().unwrap();
    assert_eq!(
        t,
        EvalTasks {
            choice: true,
            suggest: false,
            mrr: true
        }
    );
    assert_eq!(t.to_string(), "choice,mrr");
    assert_eq!(
        " suggest ".parse::<EvalTasks>().unwrap().to_string(),
        "suggest"
    );
    assert_eq!(EvalTasks::default().to_string(), "choice,suggest,mrr");
    assert!("choice,speed".parse::<EvalTasks>().is_err());
    assert!("".parse::<EvalTasks>().is_err());
}

#[test]
fn synthetic_gold_is_the_projection_of_the_worse_sample() {
    let sample = |id: &str, defects: Vec<DefectTag>| UISample {
        id: id.into(),
        image: format!("images/{id}.png"),
        caption: "login screen".into(),
        quality: QualityTag::WellDesigned,
        defects,
        source: Source::Synthetic,
        device: Device::default(),
        origin_id: "x".into(),
        key: "k".into(),
        split: Split::Test,
    };
    let pair = |preferred: Choice, principles: Vec<CrapPrinciple>| PreferencePair {
        pair_id: "p".into(),
        a: "x".into(),
        b: "y".into(),
        preferred,
        principles,
        caption: "login screen".into(),
        rater_id: None,
        cluster_id: None,
        split: Split::Test,
        irrelevant: false,
        note: None,
    };
    let data = EvalDataset::from_records(
        "d",
        Path::new("."),
        vec![
            sample("x", vec![]),
            sample("y", vec![DefectTag::BadSpacing, DefectTag::BadTextContrast]),
        ],
        vec![pair(Choice::A, vec![])],
        None,
    );
    let expected: BTreeSet<CrapPrinciple> = [
        CrapPrinciple::Contrast,
        CrapPrinciple::Alignment,
        CrapPrinciple::Proximity,
    ]
    .into();
    assert_eq!(data.gold_principles(&data.pairs[0]), expected);
    // The worse side is the one not preferred.
    assert!(data.gold_principles(&pair(Choice::B, vec![])).is_empty());
    // Rater-selected principles win.
    assert_eq!(
        data.gold_principles(&pair(Choice::A, vec![CrapPrinciple::Repetition])),
        [CrapPrinciple::Repetition].into()
    );
    assert!(data.gold_principles(&pair(Choice::Same, vec![])).is_empty());
}

#[test]
fn harness_matches_per_pair_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let root = forged(dir.path());
    let model = Model::init(ModelConfig::default(), 11);
    let data = EvalDataset::load(&root, None, None).unwrap();
    assert!(!data.pairs.is_empty());

    let eval = evaluate("init", &model, &data, EvalTasks::default()).unwrap();
    let layout = ForgeLayout::new(&root);
    let bitmap = |id: &str| Bitmap::read_png(&layout.image_path(&data.samples[id].image)).unwrap();

    // Choice: independent scoring straight from the bitmaps.
    let strict: Vec<&PreferencePair> = data
        .pairs
        .iter()
        .filter(|p| p.preferred != Choice::Same)
        .collect();
    let mut correct = 0;
    for p in &strict {
        let sa = design_score(&model, &bitmap(&p.a), &p.caption).unwrap();
        let sb = design_score(&model, &bitmap(&p.b), &p.caption).unwrap();
        let chosen = if sb > sa { Choice::B } else { Choice::A };
        correct += usize::from(chosen == p.preferred);
    }
    let choice = eval.choice.as_ref().unwrap();
    assert_eq!(
        (choice.overall.correct, choice.overall.total),
        (correct, strict.len())
    );
    assert_eq!(eval.counts["strict_pairs"], strict.len());

    // Suggestions: every strict synthetic pair carries injected defects.
    let suggestion = eval.suggestion.as_ref().unwrap();
    assert_eq!(eval.counts["suggestion_pairs"], strict.len());
    assert_eq!(suggestion.pairs_used, strict.len());
    let (_, worse) = strict[0].ordered().unwrap();
    let (_, direct) = suggest_defects(
        &model,
        &bitmap(worse),
        &strict[0].caption,
        &DefectTag::ALL,
        SuggestMode::CrapOnly,
    )
    .unwrap();
    assert!(direct.iter().all(|s| s.tag.principles().len() == 1));

    // Retrieval: one item per distinct preferred screenshot.
    let better: BTreeSet<&str> = strict.iter().map(|p| p.ordered().unwrap().0).collect();
    assert_eq!(eval.counts["retrieval_items"], better.len());
    let mrr = eval.mrr["forged"];
    assert!(mrr > 0.0 && mrr <= 1.0);

    // Deterministic.
    assert_eq!(
        evaluate("init", &model, &data, EvalTasks::default()).unwrap(),
        eval
    );
}

#[test]
fn tasks_and_splits_restrict_the_work() {
    let dir = tempfile::tempdir().unwrap();
    let root = forged(dir.path());
    let layout = ForgeLayout::new(&root);
    let mut samples: Vec<UISample> = read_jsonl(&layout.samples()).unwrap();
    let mut pairs: Vec<PreferencePair> = read_jsonl(&layout.pairs()).unwrap();
    assign_splits(
        &mut samples,
        &mut pairs,
        SplitRatios::new(0.5, 0.0, 0.5).unwrap(),
        SplitKey::Url,
        None,
        2,
    )
    .unwrap();
    let data = EvalDataset::from_records(
        "f",
        &root,
        samples.clone(),
        pairs.clone(),
        Some(Split::Test),
    );
    assert!(data.samples.values().all(|s| s.split == Split::Test));
    assert_eq!(
        data.pairs.len(),
        pairs.iter().filter(|p| p.split == Split::Test).count()
    );

    let model = Model::init(ModelConfig::default(), 11);
    let only_mrr = evaluate("m", &model, &data, "mrr".parse().unwrap()).unwrap();
    assert!(only_mrr.choice.is_none() && only_mrr.suggestion.is_none());
    assert_eq!(only_mrr.mrr.len(), 1);
}

#[test]
fn baseline_row_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let root = forged(dir.path());
    let data = EvalDataset::load(&root, None, None).unwrap();
    let a = baseline(&data, 128).unwrap();
    assert_eq!(a.model, RANDOM_BASELINE);
    assert_eq!(a, baseline(&data, 128).unwrap());
    let m = a.mrr["forged"];
    assert!(m > 0.0 && m <= 1.0);
}

#[test]
fn missing_dataset_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(EvalDataset::load(&dir.path().join("nope"), None, None).is_err());
}
