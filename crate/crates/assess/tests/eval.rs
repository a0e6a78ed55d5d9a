//! Evaluation metrics against hand tallies and brute-force oracles.

use std::collections::{BTreeMap, BTreeSet};

use jitterlab_assess::eval::{
    design_choice_accuracy, emit_report, pair_source, random_baseline_mrr, retrieval_mrr,
    suggestion_f1, ChoiceAccuracy, EvalReport, ModelEval, RetrievalItem,
};
use jitterlab_assess::AssessError;
use jitterlab_core::dataset::{Choice, PreferencePair, Split};
use jitterlab_core::jitter::CrapPrinciple;
use jitterlab_core::seed::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

fn pair(id: usize, preferred: Choice, rater: Option<&str>) -> PreferencePair {
    PreferencePair {
        pair_id: format!("p{id}"),
        a: format!("a{id}"),
        b: format!("b{id}"),
        preferred,
        principles: vec![],
        caption: "login screen".into(),
        rater_id: rater.map(str::to_string),
        cluster_id: None,
        split: Split::Test,
        irrelevant: false,
        note: None,
    }
}

#[test]
fn seven_pair_fixture_scores_four_of_seven() {
    use Choice::*;
    // (recorded preference, scripted answer, rated?)
    let fixture = [
        (A, A, true),
        (B, A, true),
        (A, A, false),
        (B, B, false),
        (Same, A, false),
        (A, B, false),
        (B, B, true),
        (A, B, true),
    ];
    let pairs: Vec<PreferencePair> = fixture
        .iter()
        .enumerate()
        .map(|(i, &(p, _, rated))| pair(i, p, rated.then_some("r1")))
        .collect();
    let answers: BTreeMap<String, Choice> = fixture
        .iter()
        .enumerate()
        .map(|(i, &(_, c, _))| (format!("p{i}"), c))
        .collect();
    let acc = design_choice_accuracy(&pairs, pair_source, |p| Ok(answers[&p.pair_id])).unwrap();
    assert_eq!((acc.overall.correct, acc.overall.total), (4, 7));
    assert!((acc.overall.accuracy - 4.0 / 7.0).abs() < 1e-12);
    assert_eq!(
        (
            acc.groups["human-pair"].correct,
            acc.groups["human-pair"].total
        ),
        (2, 4)
    );
    assert_eq!(
        (
            acc.groups["synthetic-pair"].correct,
            acc.groups["synthetic-pair"].total
        ),
        (2, 3)
    );
}

#[test]
fn oracle_and_constant_choosers() {
    let pairs: Vec<PreferencePair> = (0..10)
        .map(|i| pair(i, if i % 2 == 0 { Choice::A } else { Choice::B }, None))
        .collect();
    let perfect = design_choice_accuracy(&pairs, pair_source, |p| Ok(p.preferred)).unwrap();
    assert_eq!(perfect.overall.accuracy, 1.0);
    let constant = design_choice_accuracy(&pairs, pair_source, |_| Ok(Choice::A)).unwrap();
    assert_eq!(constant.overall.accuracy, 0.5);
}

#[test]
fn ties_only_is_no_pairs() {
    let pairs = vec![pair(0, Choice::Same, None)];
    assert!(matches!(
        design_choice_accuracy(&pairs, pair_source, |_| Ok(Choice::A)),
        Err(AssessError::NoPairs)
    ));
    assert!(matches!(
        design_choice_accuracy(&[], pair_source, |_| Ok(Choice::A)),
        Err(AssessError::NoPairs)
    ));
}

#[test]
fn random_chooser_is_near_chance() {
    let pairs: Vec<PreferencePair> = (0..1000)
        .map(|i| pair(i, if i % 2 == 0 { Choice::A } else { Choice::B }, None))
        .collect();
    let mut rng = seeded_rng(2024);
    let acc: ChoiceAccuracy = design_choice_accuracy(&pairs, pair_source, |_| {
        Ok(if rng.random::<bool>() {
            Choice::A
        } else {
            Choice::B
        })
    })
    .unwrap();
    assert!(
        (acc.overall.accuracy - 0.5).abs() <= 0.05,
        "{}",
        acc.overall.accuracy
    );
}

fn set(ps: &[CrapPrinciple]) -> BTreeSet<CrapPrinciple> {
    ps.iter().copied().collect()
}

/// Confusion counts by enumerating every (pair, principle) cell.
fn brute_force_macro(pred: &[u8], gold: &[u8], correct: &[bool], adjusted: bool) -> (f64, f64) {
    let mut f1s = Vec::new();
    let mut recalls = Vec::new();
    for bit in 0..4 {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for i in 0..gold.len() {
            if gold[i] == 0 {
                continue;
            }
            let p = if adjusted && !correct[i] { 0 } else { pred[i] };
            let (pp, gg) = (p >> bit & 1 == 1, gold[i] >> bit & 1 == 1);
            if pp && gg {
                tp += 1.0;
            } else if pp {
                fp += 1.0;
            } else if gg {
                fn_ += 1.0;
            }
        }
        let precision: f64 = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall: f64 = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        f1s.push(if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        });
        recalls.push(recall);
    }
    (
        f1s.iter().sum::<f64>() / 4.0,
        recalls.iter().sum::<f64>() / 4.0,
    )
}

fn from_mask(m: u8) -> BTreeSet<CrapPrinciple> {
    CrapPrinciple::ALL
        .iter()
        .enumerate()
        .filter(|(i, _)| m >> i & 1 == 1)
        .map(|(_, &p)| p)
        .collect()
}

#[test]
fn five_pair_fixture_matches_the_confusion_oracle() {
    use CrapPrinciple::*;
    let pred = [
        set(&[Contrast, Alignment]),
        set(&[Contrast]),
        set(&[]),
        set(&[Proximity, Repetition]),
        set(&[Alignment]),
    ];
    let gold = [
        set(&[Contrast]),
        set(&[Contrast, Proximity]),
        set(&[Alignment]),
        set(&[Proximity]),
        set(&[]),
    ];
    let correct = [true, false, true, false, true];
    let mask = |s: &BTreeSet<CrapPrinciple>| {
        CrapPrinciple::ALL
            .iter()
            .enumerate()
            .filter(|(_, p)| s.contains(p))
            .map(|(i, _)| 1u8 << i)
            .sum::<u8>()
    };
    let pm: Vec<u8> = pred.iter().map(mask).collect();
    let gm: Vec<u8> = gold.iter().map(mask).collect();
    let r = suggestion_f1(&pred, &gold, Some(&correct)).unwrap();
    let (f1, rec) = brute_force_macro(&pm, &gm, &correct, false);
    let (af1, arec) = brute_force_macro(&pm, &gm, &correct, true);
    assert_eq!(r.pairs_used, 4);
    assert!((r.macro_f1 - f1).abs() < 1e-12 && (r.macro_recall - rec).abs() < 1e-12);
    assert!(
        (r.adjusted_macro_f1 - af1).abs() < 1e-12 && (r.adjusted_macro_recall - arec).abs() < 1e-12
    );
    assert!(r.adjusted_macro_f1 <= r.macro_recall);
    // Hand tally for Contrast: tp 2, fp 0, fn 0 unadjusted; tp 1, fn 1 adjusted.
    assert_eq!(
        (
            r.per_principle[&Contrast].tp,
            r.per_principle[&Contrast].fn_
        ),
        (2, 0)
    );
    assert_eq!(
        (
            r.adjusted_per_principle[&Contrast].tp,
            r.adjusted_per_principle[&Contrast].fn_
        ),
        (1, 1)
    );
}

#[test]
fn perfect_and_empty_predictions() {
    use CrapPrinciple::*;
    let gold = [
        set(&[Contrast]),
        set(&[Repetition, Alignment]),
        set(&[Proximity]),
    ];
    let r = suggestion_f1(&gold, &gold, Some(&[true, true, true])).unwrap();
    assert_eq!((r.macro_f1, r.adjusted_macro_f1), (1.0, 1.0));
    let empty = vec![BTreeSet::new(); 3];
    assert_eq!(suggestion_f1(&empty, &gold, None).unwrap().macro_f1, 0.0);
    assert!(matches!(
        suggestion_f1(&empty[..2], &gold, None),
        Err(AssessError::ShapeMismatch(_))
    ));
    assert!(matches!(
        suggestion_f1(&empty, &gold, Some(&[true])),
        Err(AssessError::ShapeMismatch(_))
    ));
}

proptest! {
    #[test]
    fn adjusting_never_raises_recall(
        rows in proptest::collection::vec((0u8..16, 0u8..16, any::<bool>()), 1..30)
    ) {
        let pred: Vec<_> = rows.iter().map(|r| from_mask(r.0)).collect();
        let gold: Vec<_> = rows.iter().map(|r| from_mask(r.1)).collect();
        let correct: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let s = suggestion_f1(&pred, &gold, Some(&correct)).unwrap();
        prop_assert!(s.adjusted_macro_recall <= s.macro_recall + 1e-12);
        for p in CrapPrinciple::ALL {
            prop_assert!(s.adjusted_per_principle[&p].recall <= s.per_principle[&p].recall + 1e-12);
            for v in [s.per_principle[&p].f1, s.per_principle[&p].precision, s.per_principle[&p].recall] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

/// Zeroing predictions only loses true positives, so recall drops; F1 is
/// not bounded by recall, since it also rewards precision.
#[test]
fn adjusted_f1_is_not_bounded_by_recall() {
    use CrapPrinciple::*;
    let pred = [set(&[]), set(&[Contrast, Repetition, Alignment])];
    let gold = [set(&[Contrast]), set(&[Contrast, Alignment, Proximity])];
    let s = suggestion_f1(&pred, &gold, Some(&[false, true])).unwrap();
    assert!((s.adjusted_macro_recall - 0.375).abs() < 1e-12);
    assert!((s.adjusted_macro_f1 - (2.0 / 3.0 + 1.0) / 4.0).abs() < 1e-12);
    assert!(s.adjusted_macro_f1 > s.macro_recall);
}

fn item(id: &str, description: &str, image: Vec<f32>) -> RetrievalItem {
    RetrievalItem {
        id: id.into(),
        description: description.into(),
        image,
    }
}

/// Four screenshots; "d1" finds its match at rank 1, "d2" at rank 2 and
/// "d3" at rank 4.
fn rank_fixture() -> (Vec<RetrievalItem>, BTreeMap<&'static str, Vec<f32>>) {
    let items = vec![
        item("A", "d1", vec![1.0, 0.0, 0.0]),
        item("B", "d2", vec![0.8, 0.6, 0.0]),
        item("C", "d2", vec![0.6, 0.8, 0.0]),
        item("D", "d3", vec![0.0, 0.0, 1.0]),
    ];
    let queries = BTreeMap::from([
        ("d1", vec![1.0, 0.0, 0.0]),
        ("d2", vec![1.0, 0.0, 0.0]),
        ("d3", vec![0.6, 0.8, -0.1]),
    ]);
    (items, queries)
}

#[test]
fn mrr_of_ranks_one_two_four() {
    let (items, queries) = rank_fixture();
    let mrr = retrieval_mrr(&items, |d| queries[d].clone()).unwrap();
    assert!((mrr - (1.0 + 0.5 + 0.25) / 3.0).abs() < 1e-12, "{mrr}");
    assert!((mrr - 0.58333).abs() < 1e-5);
}

#[test]
fn mrr_oracle_embedders() {
    let axis = |k: usize| {
        (0..4)
            .map(|i| if i == k { 1.0 } else { 0.0 })
            .collect::<Vec<f32>>()
    };
    let items: Vec<RetrievalItem> = (0..4)
        .map(|k| item(&format!("s{k}"), &format!("d{k}"), axis(k)))
        .collect();
    let key = |d: &str| d[1..].parse::<usize>().unwrap();
    assert_eq!(retrieval_mrr(&items, |d| axis(key(d))).unwrap(), 1.0);
    // Each query points at the next screenshot, putting its match second.
    let near_next = |d: &str| {
        let k = key(d);
        let mut v = vec![0.0f32; 4];
        v[(k + 1) % 4] = 1.0;
        v[k] = 0.5;
        v
    };
    assert_eq!(retrieval_mrr(&items, near_next).unwrap(), 0.5);
    assert!(matches!(
        retrieval_mrr(&items[..1], |d| axis(key(d))),
        Err(AssessError::NoSamples)
    ));
}

#[test]
fn random_baseline_is_deterministic_and_in_range() {
    let items: Vec<RetrievalItem> = (0..20)
        .map(|k| item(&format!("s{k}"), &format!("d{k}"), vec![1.0, 0.0]))
        .collect();
    let a = random_baseline_mrr(&items, 16, 5).unwrap();
    assert_eq!(a, random_baseline_mrr(&items, 16, 5).unwrap());
    assert!(a > 0.0 && a <= 1.0);
}

proptest! {
    #[test]
    fn mrr_is_permutation_invariant(
        vecs in proptest::collection::vec((proptest::collection::vec(-1.0f32..1.0, 3), 0usize..4), 2..12),
        seed in any::<u64>(),
    ) {
        let items: Vec<RetrievalItem> = vecs
            .iter()
            .enumerate()
            .map(|(i, (v, d))| item(&format!("s{i:02}"), &format!("d{d}"), v.clone()))
            .collect();
        let embed = |d: &str| {
            let k = d[1..].parse::<f32>().unwrap();
            vec![k.cos(), k.sin(), 0.3]
        };
        let base = retrieval_mrr(&items, embed).unwrap();
        let mut shuffled = items.clone();
        let mut rng = seeded_rng(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        prop_assert_eq!(base, retrieval_mrr(&shuffled, embed).unwrap());
        prop_assert!(base > 0.0 && base <= 1.0);
    }
}

fn report(models: usize) -> EvalReport {
    EvalReport {
        models: (0..models)
            .map(|i| ModelEval {
                model: format!("model-{i}"),
                choice: None,
                suggestion: None,
                mrr: BTreeMap::from([("jitterweb".to_string(), 0.25 * (i + 1) as f64)]),
                counts: BTreeMap::from([("pairs".to_string(), 10 * i)]),
            })
            .collect(),
        config: serde_json::json!({"seed": 7}),
    }
}

#[test]
fn report_round_trips_and_renders_one_row_per_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let mut r = report(3);
    let pairs = [pair(0, Choice::A, None), pair(1, Choice::B, Some("x"))];
    r.models[0].choice =
        Some(design_choice_accuracy(&pairs, pair_source, |_| Ok(Choice::A)).unwrap());
    let table_path = emit_report(&r, &path).unwrap();
    let back: EvalReport = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, r);
    let table = std::fs::read_to_string(table_path).unwrap();
    assert_eq!(table.lines().count(), 1 + 3);
    assert!(table.contains("MRR jitterweb"));
}

#[test]
fn missing_directory_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nope").join("report.json");
    assert!(matches!(
        emit_report(&report(1), &path),
        Err(AssessError::IoFailure { .. })
    ));
}
