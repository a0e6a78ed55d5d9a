//! Short training runs: overfitting, pairwise preference, determinism and
//! checkpoint persistence.

mod common;

use std::f64::consts::LN_2;

use jitterlab_model::checkpoint;
use jitterlab_model::data::DatasetView;
use jitterlab_model::{
    run_schedule, train_stage, Model, ModelConfig, ModelError, Objective, ScheduleConfig,
    TrainConfig,
};

#[test]
fn contrastive_overfits_eight_samples() {
    let view = common::contrastive_view(8);
    let mut cfg = TrainConfig::preset("desk", Objective::BatchContrastive, 7).unwrap();
    cfg.epochs = 300;
    cfg.max_steps = Some(300);
    let (params, losses) =
        train_stage(Model::init(ModelConfig::default(), 7), &view, &cfg).unwrap();
    let (first, last) = (losses[0], *losses.last().unwrap());
    println!(
        "contrastive overfit: {} steps, loss {first:.4} -> {last:.4}",
        losses.len()
    );
    assert!(losses.len() <= 300);
    assert!(last < 0.1 * first, "final {last} vs initial {first}");
    assert!(params.all_finite());
}

#[test]
fn pairwise_stage_prefers_originals() {
    let (_dir, mut view) = common::forged_view(3, 11);
    view.pairs.truncate(8);
    assert_eq!(view.pairs.len(), 8);
    let mut cfg = TrainConfig::preset("desk", Objective::Pairwise, 3).unwrap();
    cfg.epochs = 60;
    let (_, losses) = train_stage(Model::init(ModelConfig::default(), 3), &view, &cfg).unwrap();
    let last = *losses.last().unwrap();
    println!("pairwise: loss {:.4} -> {last:.4}", losses[0]);
    assert!(last < LN_2, "final pairwise loss {last}");
}

#[test]
fn empty_views_are_rejected() {
    let cfg = TrainConfig::preset("desk", Objective::Pairwise, 0).unwrap();
    let err = train_stage(
        Model::init(ModelConfig::tiny(), 0),
        &DatasetView::default(),
        &cfg,
    )
    .unwrap_err();
    assert!(matches!(err, ModelError::EmptyDataset));
    let cfg = TrainConfig::preset("desk", Objective::BatchContrastive, 0).unwrap();
    assert!(matches!(
        train_stage(
            Model::init(ModelConfig::tiny(), 0),
            &DatasetView::default(),
            &cfg
        ),
        Err(ModelError::EmptyDataset)
    ));
}

#[test]
fn presets_match_published_hyperparameters() {
    let s1 = TrainConfig::preset("paper-stage1", Objective::BatchContrastive, 0).unwrap();
    assert_eq!(
        (s1.batch_size, s1.epochs, s1.learning_rate, s1.weight_decay),
        (128, 1, 5e-7, 0.2)
    );
    let s2 = TrainConfig::preset("paper-stage2+", Objective::Pairwise, 0).unwrap();
    assert_eq!(
        (s2.batch_size, s2.epochs, s2.learning_rate, s2.weight_decay),
        (256, 1, 5e-7, 0.2)
    );
    let desk = TrainConfig::preset("desk", Objective::Pairwise, 0).unwrap();
    assert_eq!(
        (
            desk.batch_size,
            desk.epochs,
            desk.learning_rate,
            desk.weight_decay
        ),
        (32, 3, 1e-3, 0.01)
    );
    let desk1 = TrainConfig::preset("desk", Objective::BatchContrastive, 0).unwrap();
    assert_eq!(desk1.epochs, 20);
    for c in [s1, s2, desk] {
        assert_eq!((c.beta1, c.beta2, c.eps), (0.9, 0.98, 1e-6));
    }
    assert!(TrainConfig::preset("huge", Objective::Pairwise, 0).is_err());
    assert!(ScheduleConfig::new("desk", 5, 0).is_err());
}

fn short_schedule(last_stage: usize, seed: u64) -> ScheduleConfig {
    let mut s = ScheduleConfig::new("desk", last_stage, seed).unwrap();
    for c in &mut s.stages {
        c.epochs = 1;
        c.batch_size = 4;
        c.max_steps = Some(2);
    }
    s
}

#[test]
fn schedule_is_deterministic_and_respects_disabled_stages() {
    let (_dir, view) = common::forged_view(2, 5);
    let run = |last, seed| {
        run_schedule(
            Model::init(ModelConfig::default(), seed),
            &view,
            Some(&view),
            &short_schedule(last, seed),
        )
        .unwrap()
    };
    let (a, traces_a) = run(2, 9);
    let (b, _) = run(2, 9);
    assert_eq!(checkpoint::to_bytes(&a), checkpoint::to_bytes(&b));
    let stages: Vec<_> = traces_a.iter().map(|t| (t.stage, t.objective)).collect();
    assert_eq!(
        stages,
        vec![
            (1, Some(Objective::BatchContrastive)),
            (2, Some(Objective::Pairwise))
        ]
    );

    let (pretrain, traces) = run(1, 9);
    assert_eq!(traces.len(), 1);
    assert_ne!(checkpoint::to_bytes(&pretrain), checkpoint::to_bytes(&a));

    let (_, all) = run(4, 9);
    assert_eq!(
        all.iter().map(|t| t.stage).collect::<Vec<_>>(),
        vec![1, 2, 3, 4]
    );
    let (_, no_betterapp) = run_schedule(
        Model::init(ModelConfig::default(), 9),
        &view,
        None,
        &short_schedule(4, 9),
    )
    .unwrap();
    assert_eq!(no_betterapp.len(), 2);
}

#[test]
fn checkpoint_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let m = Model::init(ModelConfig::default(), 1);
    checkpoint::save(&m, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back.data, m.data);
    assert!(checkpoint::load(&dir.path().join("missing.ckpt")).is_err());
}
