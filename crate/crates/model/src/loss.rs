//! Batch-contrastive and pairwise-contrastive objectives, in `f64`.
//!
//! Both take unit-norm embeddings and a log temperature `τ`; logits are
//! `exp(τ)·v·w`. Passing [`LITERAL_TAU`] (scale 1) evaluates the objectives
//! on raw dot products.

use crate::encoder::Embedding;
use crate::ModelError;

/// `τ = 0`, i.e. logit scale 1.
pub const LITERAL_TAU: f64 = 0.0;

/// Loss value with gradients for the embeddings and `τ`.
#[derive(Clone, Debug)]
pub struct LossGrad {
    pub loss: f64,
    /// Gradient per embedding row, in the same layout as the inputs.
    pub grads: Vec<Vec<f64>>,
    pub d_tau: f64,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Symmetric cross-entropy over the `n×n` logit matrix of flat `v` and `w`
/// (`n×d` each): the sum of row-wise and column-wise negative log-softmax of
/// the diagonal. `grads` holds `[dV, dW]`.
pub fn clip_loss_with_grad(v: &[f64], w: &[f64], n: usize, d: usize, tau: f64) -> LossGrad {
    assert_eq!(v.len(), n * d);
    assert_eq!(w.len(), n * d);
    let scale = tau.exp();
    let mut logits = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = (0..d).map(|k| v[i * d + k] * w[j * d + k]).sum();
            logits[i * n + j] = scale * dot;
        }
    }
    // G = (P_row − I) + (P_col − I)
    let mut g = vec![0.0; n * n];
    let mut loss = 0.0;
    for i in 0..n {
        let row = &logits[i * n..(i + 1) * n];
        let lse = log_sum_exp(row.iter().copied());
        loss += lse - row[i];
        for j in 0..n {
            g[i * n + j] += (row[j] - lse).exp();
        }
        g[i * n + i] -= 1.0;
    }
    for j in 0..n {
        let col = (0..n).map(|i| logits[i * n + j]);
        let lse = log_sum_exp(col);
        loss += lse - logits[j * n + j];
        for i in 0..n {
            g[i * n + j] += (logits[i * n + j] - lse).exp();
        }
        g[j * n + j] -= 1.0;
    }
    let mut dv = vec![0.0; n * d];
    let mut dw = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..n {
            let gij = scale * g[i * n + j];
            for k in 0..d {
                dv[i * d + k] += gij * w[j * d + k];
                dw[j * d + k] += gij * v[i * d + k];
            }
        }
    }
    let d_tau = g.iter().zip(&logits).map(|(a, b)| a * b).sum();
    LossGrad {
        loss,
        grads: vec![dv, dw],
        d_tau,
    }
}

/// Mean over `b` pairs of `−ln σ(s⁺ − s⁻)` with `s± = exp(τ)·v±·w⁺`.
/// `grads` holds `[dV⁺, dV⁻, dW⁺]`.
pub fn pairwise_loss_with_grad(
    v_plus: &[f64],
    v_minus: &[f64],
    w_plus: &[f64],
    b: usize,
    d: usize,
    tau: f64,
) -> LossGrad {
    assert!(v_plus.len() == b * d && v_minus.len() == b * d && w_plus.len() == b * d);
    let scale = tau.exp();
    let mut loss = 0.0;
    let mut dvp = vec![0.0; b * d];
    let mut dvm = vec![0.0; b * d];
    let mut dwp = vec![0.0; b * d];
    let mut d_tau = 0.0;
    let inv = 1.0 / b as f64;
    for i in 0..b {
        let r = i * d..(i + 1) * d;
        let sp = scale * dot64(&v_plus[r.clone()], &w_plus[r.clone()]);
        let sm = scale * dot64(&v_minus[r.clone()], &w_plus[r.clone()]);
        loss += softplus(sm - sp) * inv;
        let s = sigmoid(sm - sp) * inv;
        for k in r {
            dvp[k] = -s * scale * w_plus[k];
            dvm[k] = s * scale * w_plus[k];
            dwp[k] = s * scale * (v_minus[k] - v_plus[k]);
        }
        d_tau += s * (sm - sp);
    }
    LossGrad {
        loss,
        grads: vec![dvp, dvm, dwp],
        d_tau,
    }
}

fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn flatten(rows: &[Embedding]) -> Vec<f64> {
    rows.iter().flatten().map(|&x| x as f64).collect()
}

/// Batch-contrastive loss over paired image (`v`) and text (`w`) embeddings.
pub fn clip_loss(v: &[Embedding], w: &[Embedding], tau: f64) -> Result<f64, ModelError> {
    let d = v.first().map_or(0, Vec::len);
    if v.is_empty() || v.len() != w.len() || v.iter().chain(w).any(|r| r.len() != d) {
        return Err(ModelError::ShapeMismatch(format!(
            "clip_loss needs equally many equal-width rows, got {} and {}",
            v.len(),
            w.len()
        )));
    }
    Ok(clip_loss_with_grad(&flatten(v), &flatten(w), v.len(), d, tau).loss)
}

/// Pairwise loss for a single (preferred, non-preferred, description) triple.
pub fn pairwise_loss(v_plus: &[f32], v_minus: &[f32], w_plus: &[f32], tau: f64) -> f64 {
    assert!(
        v_plus.len() == w_plus.len() && v_minus.len() == w_plus.len(),
        "embedding widths differ"
    );
    let f = |x: &[f32]| x.iter().map(|&v| v as f64).collect::<Vec<_>>();
    pairwise_loss_with_grad(&f(v_plus), &f(v_minus), &f(w_plus), 1, w_plus.len(), tau).loss
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_batch_has_zero_loss() {
        let v = vec![vec![1.0f32, 0.0]];
        assert!(clip_loss(&v, &v, 2.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let v = vec![vec![1.0f32, 0.0]];
        let w = vec![vec![1.0f32, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            clip_loss(&v, &w, 0.0),
            Err(ModelError::ShapeMismatch(_))
        ));
        assert!(matches!(
            clip_loss(&[], &[], 0.0),
            Err(ModelError::ShapeMismatch(_))
        ));
        assert!(matches!(
            clip_loss(&v, &[vec![1.0f32]], 0.0),
            Err(ModelError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }
}
