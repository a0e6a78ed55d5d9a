//! Finite-difference verification of the analytic gradients.
//!
//! Every parameter of the tiny model shape is perturbed by `±h` in `f64` and
//! the central difference of the loss is compared with the tape's gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::patchify;
use crate::params::{ModelConfig, Params};
use crate::tokenizer::tokenize_with;
use crate::train::{batch_loss_and_grads, Objective};

/// Finite-difference step.
pub const H: f64 = 1e-3;
/// Acceptance bound on relative error.
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor so an all-zero gradient tensor compares absolutely.
const FLOOR: f64 = 1e-6;

fn perturbed_params(seed: u64) -> Params<f64> {
    // Parameters are moved to unit scale: with the 0.02-std init a step of
    // 1e-3 is a 5% perturbation, far outside the linear regime. This also
    // breaks the symmetric init (unit gains, zero biases) so every path
    // carries a gradient. Scale 1 (τ = 0) keeps logits moderate.
    let mut p = Params::<f64>::init(ModelConfig::tiny(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let tau_idx = p.layout.logit_scale;
    for (i, t) in p.data.iter_mut().enumerate() {
        if i == tau_idx {
            t[0] = 0.0;
            continue;
        }
        for v in t.iter_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
    }
    p
}

fn random_images(count: usize, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let side = cfg.image_size;
    (0..count)
        .flat_map(|_| {
            let px: Vec<u8> = (0..side * side * 3).map(|_| rng.random()).collect();
            patchify(&px, side, cfg.patch)
        })
        .map(f64::from)
        .collect()
}

/// Norm-wise relative error `‖a − n‖ / max(‖a‖, ‖n‖, FLOOR)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    diff / na.max(nn).max(FLOOR)
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Error over the concatenation of every parameter.
    pub overall: f64,
    /// Worst error over individual tensors, with its name.
    pub worst_tensor: (f64, String),
    pub checked: usize,
}

/// Runs the check for one objective on a fixed random batch.
pub fn check(objective: Objective) -> GradCheckReport {
    let params = perturbed_params(5);
    let cfg = params.config;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let texts: Vec<Vec<usize>> = [
        "ui screenshot. well-designed. login screen",
        "a b c",
        "checkout page with cart",
    ]
    .iter()
    .map(|t| tokenize_with(t, cfg.vocab, cfg.max_tokens))
    .collect();
    let (images, texts) = match objective {
        Objective::BatchContrastive => (3, texts),
        Objective::Pairwise => (4, texts[..2].to_vec()),
    };
    let patches = random_images(images, &cfg, &mut rng);
    let (_, analytic) = batch_loss_and_grads(&params, objective, patches.clone(), images, &texts);

    let mut numeric: Vec<Vec<f64>> = Vec::new();
    let mut probe = params.clone();
    for t in 0..params.data.len() {
        let mut row = Vec::with_capacity(params.data[t].len());
        for i in 0..params.data[t].len() {
            let orig = probe.data[t][i];
            probe.data[t][i] = orig + H;
            let (up, _) = batch_loss_and_grads(&probe, objective, patches.clone(), images, &texts);
            probe.data[t][i] = orig - H;
            let (down, _) =
                batch_loss_and_grads(&probe, objective, patches.clone(), images, &texts);
            probe.data[t][i] = orig;
            row.push((up - down) / (2.0 * H));
        }
        numeric.push(row);
    }
    let mut worst_tensor = (0.0, String::new());
    for (t, spec) in params.specs.iter().enumerate() {
        let e = relative_error(&analytic[t], &numeric[t]);
        if e > worst_tensor.0 {
            worst_tensor = (e, spec.name.clone());
        }
    }
    let flat = |v: &[Vec<f64>]| v.iter().flatten().copied().collect::<Vec<_>>();
    GradCheckReport {
        overall: relative_error(&flat(&analytic), &flat(&numeric)),
        worst_tensor,
        checked: params.count(),
    }
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.overall < TOLERANCE && self.worst_tensor.0 < TOLERANCE
    }
}
