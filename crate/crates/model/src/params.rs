//! Model shape, the flat parameter store, and its fixed layout.
//!
//! Every tensor is a row-major matrix (biases and gains are `1×n`). The
//! order in which [`Params::init`] registers tensors is the order they are
//! written to checkpoints.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Initial logit scale `exp(τ)`.
pub const INITIAL_LOGIT_SCALE: f64 = 14.3;
/// Upper bound on `exp(τ)`.
pub const MAX_LOGIT_SCALE: f64 = 100.0;
const INIT_STD: f64 = 0.02;

/// Architecture hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub embed_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub vocab: usize,
    pub image_size: usize,
    pub patch: usize,
    pub max_tokens: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 128,
            embed_dim: 128,
            layers: 2,
            heads: 4,
            vocab: 8192,
            image_size: 224,
            patch: 32,
            max_tokens: 77,
        }
    }
}

impl ModelConfig {
    /// The smallest shape used by gradient checks: one block, width 8, on
    /// 64-pixel images cut into 16-pixel patches.
    pub fn tiny() -> Self {
        ModelConfig {
            d_model: 8,
            embed_dim: 8,
            layers: 1,
            heads: 2,
            vocab: 64,
            image_size: 64,
            patch: 16,
            max_tokens: 77,
        }
    }

    pub fn patches_per_side(&self) -> usize {
        self.image_size / self.patch
    }

    pub fn num_patches(&self) -> usize {
        self.patches_per_side().pow(2)
    }

    pub fn patch_dim(&self) -> usize {
        self.patch * self.patch * 3
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = self.d_model > 0
            && self.embed_dim > 0
            && self.heads > 0
            && self.d_model % self.heads == 0
            && self.vocab > 2
            && self.patch > 0
            && self.image_size % self.patch == 0
            && self.max_tokens >= 2;
        if ok {
            Ok(())
        } else {
            Err(format!("inconsistent model shape {self:?}"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Whether weight decay applies (2-D weight matrices only).
    pub decay: bool,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct BlockIdx {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub qkv_w: usize,
    pub qkv_b: usize,
    pub out_w: usize,
    pub out_b: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub fc1_w: usize,
    pub fc1_b: usize,
    pub fc2_w: usize,
    pub fc2_b: usize,
}

#[derive(Clone, Debug)]
pub struct TowerIdx {
    pub blocks: Vec<BlockIdx>,
    pub ln_g: usize,
    pub ln_b: usize,
    pub proj: usize,
}

/// Indices of every tensor in the store.
#[derive(Clone, Debug)]
pub struct Layout {
    pub patch_w: usize,
    pub patch_b: usize,
    pub image_pos: usize,
    pub image: TowerIdx,
    pub token: usize,
    pub text_pos: usize,
    pub text: TowerIdx,
    pub logit_scale: usize,
}

enum Init {
    Normal,
    Zeros,
    Ones,
    LogitScale,
}

/// Parameters of both towers plus the temperature.
#[derive(Clone, Debug)]
pub struct Params<S: Scalar> {
    pub config: ModelConfig,
    pub specs: Vec<ParamSpec>,
    pub data: Vec<Vec<S>>,
    pub layout: Layout,
}

struct Builder {
    specs: Vec<ParamSpec>,
    inits: Vec<Init>,
}

impl Builder {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        let decay = matches!(init, Init::Normal) && rows > 1;
        self.specs.push(ParamSpec {
            name,
            rows,
            cols,
            decay,
        });
        self.inits.push(init);
        self.specs.len() - 1
    }

    fn tower(&mut self, prefix: &str, c: &ModelConfig) -> TowerIdx {
        let d = c.d_model;
        let blocks = (0..c.layers)
            .map(|i| {
                let p = format!("{prefix}.block{i}");
                BlockIdx {
                    ln1_g: self.add(format!("{p}.ln1.g"), 1, d, Init::Ones),
                    ln1_b: self.add(format!("{p}.ln1.b"), 1, d, Init::Zeros),
                    qkv_w: self.add(format!("{p}.qkv.w"), d, 3 * d, Init::Normal),
                    qkv_b: self.add(format!("{p}.qkv.b"), 1, 3 * d, Init::Zeros),
                    out_w: self.add(format!("{p}.out.w"), d, d, Init::Normal),
                    out_b: self.add(format!("{p}.out.b"), 1, d, Init::Zeros),
                    ln2_g: self.add(format!("{p}.ln2.g"), 1, d, Init::Ones),
                    ln2_b: self.add(format!("{p}.ln2.b"), 1, d, Init::Zeros),
                    fc1_w: self.add(format!("{p}.fc1.w"), d, 4 * d, Init::Normal),
                    fc1_b: self.add(format!("{p}.fc1.b"), 1, 4 * d, Init::Zeros),
                    fc2_w: self.add(format!("{p}.fc2.w"), 4 * d, d, Init::Normal),
                    fc2_b: self.add(format!("{p}.fc2.b"), 1, d, Init::Zeros),
                }
            })
            .collect();
        TowerIdx {
            blocks,
            ln_g: self.add(format!("{prefix}.ln_f.g"), 1, d, Init::Ones),
            ln_b: self.add(format!("{prefix}.ln_f.b"), 1, d, Init::Zeros),
            proj: self.add(format!("{prefix}.proj"), d, c.embed_dim, Init::Normal),
        }
    }
}

fn build_layout(c: &ModelConfig) -> (Vec<ParamSpec>, Vec<Init>, Layout) {
    let mut b = Builder {
        specs: Vec::new(),
        inits: Vec::new(),
    };
    let patch_w = b.add("img.patch.w".into(), c.patch_dim(), c.d_model, Init::Normal);
    let patch_b = b.add("img.patch.b".into(), 1, c.d_model, Init::Zeros);
    let image_pos = b.add("img.pos".into(), c.num_patches(), c.d_model, Init::Normal);
    let image = b.tower("img", c);
    let token = b.add("txt.tok".into(), c.vocab, c.d_model, Init::Normal);
    let text_pos = b.add("txt.pos".into(), c.max_tokens, c.d_model, Init::Normal);
    let text = b.tower("txt", c);
    let logit_scale = b.add("logit_scale".into(), 1, 1, Init::LogitScale);
    let layout = Layout {
        patch_w,
        patch_b,
        image_pos,
        image,
        token,
        text_pos,
        text,
        logit_scale,
    };
    (b.specs, b.inits, layout)
}

impl<S: Scalar> Params<S> {
    /// Seeded initialization: weights ~ N(0, 0.02²), biases 0, gains 1,
    /// `τ = ln 14.3`.
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        config.validate().expect("invalid model config");
        let (specs, inits, layout) = build_layout(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let data = specs
            .iter()
            .zip(&inits)
            .map(|(s, init)| match init {
                Init::Normal => (0..s.len())
                    .map(|_| S::of(normal.sample(&mut rng)))
                    .collect(),
                Init::Zeros => vec![S::zero(); s.len()],
                Init::Ones => vec![S::one(); s.len()],
                Init::LogitScale => vec![S::of(INITIAL_LOGIT_SCALE.ln())],
            })
            .collect();
        Params {
            config,
            specs,
            data,
            layout,
        }
    }

    /// Rebuilds a store from raw tensors in layout order.
    pub fn from_tensors(config: ModelConfig, data: Vec<Vec<S>>) -> Result<Self, String> {
        config.validate()?;
        let (specs, _, layout) = build_layout(&config);
        if data.len() != specs.len() {
            return Err(format!(
                "expected {} tensors, got {}",
                specs.len(),
                data.len()
            ));
        }
        for (s, d) in specs.iter().zip(&data) {
            if s.len() != d.len() {
                return Err(format!(
                    "tensor {} has {} values, expected {}",
                    s.name,
                    d.len(),
                    s.len()
                ));
            }
        }
        Ok(Params {
            config,
            specs,
            data,
            layout,
        })
    }

    pub fn tau(&self) -> S {
        self.data[self.layout.logit_scale][0]
    }

    pub fn logit_scale(&self) -> f64 {
        self.tau().as_f64().exp()
    }

    /// Clamps `τ` so that `exp(τ) ≤ 100`.
    pub fn clamp_tau(&mut self) {
        let t = &mut self.data[self.layout.logit_scale][0];
        let max = S::of(MAX_LOGIT_SCALE.ln());
        if *t > max {
            *t = max;
        }
    }

    pub fn count(&self) -> usize {
        self.specs.iter().map(ParamSpec::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().flatten().all(|v| v.is_finite())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn cast<T: Scalar>(&self) -> Params<T> {
        Params {
            config: self.config,
            specs: self.specs.clone(),
            data: self
                .data
                .iter()
                .map(|t| t.iter().map(|v| T::of(v.as_f64())).collect())
                .collect(),
            layout: self.layout.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_shapes() {
        let p = Params::<f32>::init(ModelConfig::default(), 0);
        let c = p.config;
        assert_eq!(c.num_patches(), 49);
        assert_eq!(c.patch_dim(), 3072);
        assert_eq!(p.specs[p.layout.patch_w].rows, 3072);
        assert_eq!(p.specs[p.layout.image_pos].rows, 49);
        assert_eq!(p.specs[p.layout.token].rows, 8192);
        assert_eq!(p.specs.last().unwrap().name, "logit_scale");
        assert!((p.logit_scale() - 14.3).abs() < 1e-4);
        assert!(p.all_finite());
        assert!(p.specs[p.layout.patch_w].decay);
        assert!(!p.specs[p.layout.image.ln_g].decay);
    }

    #[test]
    fn init_is_seeded() {
        let a = Params::<f32>::init(ModelConfig::tiny(), 3);
        let b = Params::<f32>::init(ModelConfig::tiny(), 3);
        let c = Params::<f32>::init(ModelConfig::tiny(), 4);
        assert_eq!(a.data, b.data);
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn tau_clamp() {
        let mut p = Params::<f64>::init(ModelConfig::tiny(), 0);
        let i = p.layout.logit_scale;
        p.data[i][0] = 10.0;
        p.clamp_tau();
        assert!((p.logit_scale() - 100.0).abs() < 1e-9);
    }
}
