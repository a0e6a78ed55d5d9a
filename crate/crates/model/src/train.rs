//! Stage training and the four-stage schedule.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use jitterlab_core::seed::{mix_seed, seeded_rng};

use crate::data::{square_crop, DatasetView};
use crate::encoder::{image_forward, patchify, text_forward};
use crate::loss::{clip_loss_with_grad, pairwise_loss_with_grad};
use crate::optim::{AdamConfig, AdamW};
use crate::params::Params;
use crate::scalar::Scalar;
use crate::tape::Tape;
use crate::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    BatchContrastive,
    Pairwise,
}

/// Learning-rate schedule over the steps of one stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine decay from the configured rate to zero.
    #[default]
    Cosine,
}

impl LrSchedule {
    /// Rate for 0-based `step` of `total`.
    pub fn rate(self, base: f64, step: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine => {
                let t = step as f64 / total.max(1) as f64;
                base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

/// Epochs of the `desk` preset for contrastive stages.
pub const DESK_EPOCHS: usize = 20;
/// Epochs of the `desk` preset for pairwise stages.
pub const DESK_PAIRWISE_EPOCHS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub preset: String,
    /// Optional cap on optimizer steps (after which the stage stops early).
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub schedule: LrSchedule,
}

impl TrainConfig {
    /// Named presets: `paper-stage1`, `paper-stage2+` and `desk`.
    ///
    /// `desk` is sized for a small CPU run: the pairwise objective overfits
    /// a synthetic corpus within a few epochs, so it gets far fewer epochs
    /// than the contrastive one.
    pub fn preset(name: &str, objective: Objective, seed: u64) -> Result<Self, ModelError> {
        let (batch_size, epochs, learning_rate, weight_decay) = match name {
            "paper-stage1" => (128, 1, 5e-7, 0.2),
            "paper-stage2+" => (256, 1, 5e-7, 0.2),
            "desk" => (
                32,
                if objective == Objective::Pairwise {
                    DESK_PAIRWISE_EPOCHS
                } else {
                    DESK_EPOCHS
                },
                1e-3,
                0.01,
            ),
            other => return Err(ModelError::Config(format!("unknown preset `{other}`"))),
        };
        Ok(TrainConfig {
            objective,
            batch_size,
            epochs,
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-6,
            seed,
            preset: name.to_string(),
            max_steps: None,
            schedule: LrSchedule::default(),
        })
    }

    /// The config a CLI preset family (`desk` or `paper`) uses for schedule stage `stage` (1–4).
    pub fn for_stage(family: &str, stage: usize, seed: u64) -> Result<Self, ModelError> {
        let objective = if stage % 2 == 1 {
            Objective::BatchContrastive
        } else {
            Objective::Pairwise
        };
        let name = match (family, stage) {
            ("desk", _) => "desk",
            ("paper", 1) => "paper-stage1",
            ("paper", _) => "paper-stage2+",
            (other, _) => {
                return Err(ModelError::Config(format!(
                    "unknown preset family `{other}`"
                )))
            }
        };
        Self::preset(name, objective, mix_seed(seed, stage as u64))
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Per-step losses of one stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: usize,
    pub objective: Option<Objective>,
    pub losses: Vec<f64>,
}

/// Loss and parameter gradients of one batch of pre-patchified images and
/// token sequences. For [`Objective::BatchContrastive`] image `i` pairs with
/// text `i`; for [`Objective::Pairwise`] the first half of the images are the
/// preferred ones, the second half the non-preferred, one text per pair.
pub fn batch_loss_and_grads<S: Scalar>(
    params: &Params<S>,
    objective: Objective,
    patches: Vec<S>,
    images: usize,
    texts: &[Vec<usize>],
) -> (f64, Vec<Vec<S>>) {
    let mut tape = Tape::new(params);
    let img = image_forward(&mut tape, params, patches, images);
    let txt = text_forward(&mut tape, params, texts);
    let d = params.config.embed_dim;
    let v: Vec<f64> = tape.value(img).iter().map(|x| x.as_f64()).collect();
    let w: Vec<f64> = tape.value(txt).iter().map(|x| x.as_f64()).collect();
    let tau = params.tau().as_f64();
    let lg = match objective {
        Objective::BatchContrastive => clip_loss_with_grad(&v, &w, texts.len(), d, tau),
        Objective::Pairwise => {
            let b = texts.len();
            pairwise_loss_with_grad(&v[..b * d], &v[b * d..], &w, b, d, tau)
        }
    };
    let to_s = |g: &[f64]| g.iter().map(|&x| S::of(x)).collect::<Vec<S>>();
    let d_img: Vec<S> = match objective {
        Objective::BatchContrastive => to_s(&lg.grads[0]),
        Objective::Pairwise => to_s(&[lg.grads[0].as_slice(), lg.grads[1].as_slice()].concat()),
    };
    let d_txt = to_s(lg.grads.last().expect("text gradient"));
    let mut grads = tape.backward(&[(img, d_img), (txt, d_txt)]);
    grads[params.layout.logit_scale][0] += S::of(lg.d_tau);
    (lg.loss, grads)
}

/// Trains one stage with the configured learning-rate schedule. Each epoch visits the relevant view in a seeded
/// shuffled order; every image gets a random square crop (both images of a
/// pair share the crop position). Returns the updated parameters and the
/// per-step loss trace.
pub fn train_stage(
    mut params: Params<f32>,
    view: &DatasetView,
    config: &TrainConfig,
) -> Result<(Params<f32>, Vec<f64>), ModelError> {
    let n = match config.objective {
        Objective::BatchContrastive => view.contrastive.len(),
        Objective::Pairwise => view.pairs.len(),
    };
    if n == 0 {
        return Err(ModelError::EmptyDataset);
    }
    if config.batch_size == 0 {
        return Err(ModelError::Config("batch size must be positive".into()));
    }
    let side = params.config.image_size as u32;
    let (size, patch) = (params.config.image_size, params.config.patch);
    let mut opt = AdamW::new(&params, config.adam());
    let mut rng = seeded_rng(config.seed);
    let mut losses = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    let mut total_steps = config.epochs * n.div_ceil(config.batch_size);
    if let Some(m) = config.max_steps {
        total_steps = total_steps.min(m);
    }
    'epochs: for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            if config.max_steps.is_some_and(|m| losses.len() >= m) {
                break 'epochs;
            }
            let crop = |img: usize, frac: f64| {
                patchify(
                    square_crop(&view.images[img], side, frac).pixels(),
                    size,
                    patch,
                )
            };
            let (patches, count, texts) = match config.objective {
                Objective::BatchContrastive => {
                    let mut patches = Vec::new();
                    let mut texts = Vec::new();
                    for &i in chunk {
                        let item = &view.contrastive[i];
                        patches.extend(crop(item.image, rng.random::<f64>()));
                        texts.push(params.tokenize(&item.description));
                    }
                    (patches, chunk.len(), texts)
                }
                Objective::Pairwise => {
                    let fracs: Vec<f64> = chunk.iter().map(|_| rng.random::<f64>()).collect();
                    let mut patches = Vec::new();
                    for (&i, &f) in chunk.iter().zip(&fracs) {
                        patches.extend(crop(view.pairs[i].better, f));
                    }
                    for (&i, &f) in chunk.iter().zip(&fracs) {
                        patches.extend(crop(view.pairs[i].worse, f));
                    }
                    let texts = chunk
                        .iter()
                        .map(|&i| params.tokenize(&view.pairs[i].prompt))
                        .collect();
                    (patches, 2 * chunk.len(), texts)
                }
            };
            let (loss, grads) =
                batch_loss_and_grads(&params, config.objective, patches, count, &texts);
            if !loss.is_finite() {
                return Err(ModelError::Diverged { step: losses.len() });
            }
            opt.set_lr(
                config
                    .schedule
                    .rate(config.learning_rate, losses.len(), total_steps),
            );
            opt.step(&mut params, &grads);
            losses.push(loss);
        }
        tracing::debug!(
            epoch,
            steps = losses.len(),
            last = losses.last().copied().unwrap_or(f64::NAN),
            "epoch done"
        );
    }
    Ok((params, losses))
}

/// Which stages run and with what configs. Stages run in order
/// 1 (jitterweb contrastive), 2 (jitterweb pairwise), 3 (betterapp
/// contrastive), 4 (betterapp pairwise); `last_stage` disables the suffix.
#[derive(Clone, Debug)]
pub struct ScheduleConfig {
    pub stages: [TrainConfig; 4],
    pub last_stage: usize,
}

impl ScheduleConfig {
    pub fn new(family: &str, last_stage: usize, seed: u64) -> Result<Self, ModelError> {
        if !(1..=4).contains(&last_stage) {
            return Err(ModelError::Config(format!(
                "stage must be 1-4, got {last_stage}"
            )));
        }
        Ok(ScheduleConfig {
            stages: [
                TrainConfig::for_stage(family, 1, seed)?,
                TrainConfig::for_stage(family, 2, seed)?,
                TrainConfig::for_stage(family, 3, seed)?,
                TrainConfig::for_stage(family, 4, seed)?,
            ],
            last_stage,
        })
    }
}

/// Runs the schedule, each stage starting from the previous stage's weights.
/// Stages 3–4 are skipped when no betterapp view is given.
pub fn run_schedule(
    mut params: Params<f32>,
    jitterweb: &DatasetView,
    betterapp: Option<&DatasetView>,
    config: &ScheduleConfig,
) -> Result<(Params<f32>, Vec<StageTrace>), ModelError> {
    let mut traces = Vec::new();
    for stage in 1..=config.last_stage {
        let view = if stage <= 2 {
            jitterweb
        } else {
            match betterapp {
                Some(v) => v,
                None => {
                    tracing::warn!(stage, "no betterapp dataset; skipping remaining stages");
                    break;
                }
            }
        };
        let cfg = &config.stages[stage - 1];
        let (p, losses) = train_stage(params, view, cfg)?;
        params = p;
        tracing::info!(
            stage,
            steps = losses.len(),
            final_loss = losses.last().copied().unwrap_or(f64::NAN),
            "stage done"
        );
        traces.push(StageTrace {
            stage,
            objective: Some(cfg.objective),
            losses,
        });
    }
    Ok((params, traces))
}
