//! Reverse-mode autodiff over row-major matrices.
//!
//! The tape records a fixed vocabulary of fused ops — just what the encoders
//! need — and caches whatever each backward pass reuses (normalized
//! activations, attention probabilities, norms). Parameters are referenced by
//! index into a [`Params`] store, never copied onto the tape.

use std::rc::Rc;

use crate::params::Params;
use crate::scalar::{gemm, Scalar, View};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Contiguous row ranges `(start, len)`, one per sequence in a packed batch.
pub type Segments = Rc<Vec<(usize, usize)>>;

enum Op<S> {
    Input,
    Param(usize),
    MatMul(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    Gelu(usize),
    LayerNorm {
        x: usize,
        g: usize,
        b: usize,
        xhat: Vec<S>,
        rstd: Vec<S>,
    },
    Attention {
        qkv: usize,
        segments: Segments,
        heads: usize,
        probs: Vec<S>,
    },
    Gather {
        table: usize,
        ids: Vec<usize>,
    },
    AddPos {
        x: usize,
        pos: usize,
        positions: Vec<usize>,
    },
    SegmentMean {
        x: usize,
        segments: Segments,
    },
    L2Normalize {
        x: usize,
        norms: Vec<S>,
    },
}

struct Node<S> {
    rows: usize,
    cols: usize,
    value: Vec<S>,
    op: Op<S>,
}

pub struct Tape<'p, S: Scalar> {
    params: &'p Params<S>,
    nodes: Vec<Node<S>>,
}

fn gelu<S: Scalar>(x: S) -> S {
    let x = x.as_f64();
    S::of(0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh()))
}

fn gelu_grad<S: Scalar>(x: S) -> S {
    let x = x.as_f64();
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    S::of(0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x))
}

impl<'p, S: Scalar> Tape<'p, S> {
    pub fn new(params: &'p Params<S>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<S>, op: Op<S>) -> Var {
        debug_assert!(matches!(op, Op::Param(_)) || value.len() == rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[S] {
        self.val(v.0)
    }

    fn val(&self, id: usize) -> &[S] {
        match self.nodes[id].op {
            Op::Param(p) => &self.params.data[p],
            _ => &self.nodes[id].value,
        }
    }

    pub fn input(&mut self, rows: usize, cols: usize, value: Vec<S>) -> Var {
        assert_eq!(value.len(), rows * cols, "input shape mismatch");
        self.push(rows, cols, value, Op::Input)
    }

    pub fn param(&mut self, index: usize) -> Var {
        let spec = &self.params.specs[index];
        self.push(spec.rows, spec.cols, Vec::new(), Op::Param(index))
    }

    /// `x[m×k] · w[k×n]`.
    pub fn matmul(&mut self, x: Var, w: Var) -> Var {
        let (m, k) = self.shape(x);
        let (k2, n) = self.shape(w);
        assert_eq!(k, k2, "matmul inner dimension");
        let mut out = vec![S::zero(); m * n];
        gemm(
            m,
            k,
            n,
            S::one(),
            self.val(x.0),
            View::rows(k),
            self.val(w.0),
            View::rows(n),
            S::zero(),
            &mut out,
            View::rows(n),
        );
        self.push(m, n, out, Op::MatMul(x.0, w.0))
    }

    /// Adds a `1×n` row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let (m, n) = self.shape(x);
        assert_eq!(self.shape(b), (1, n), "bias shape");
        let bias = self.val(b.0);
        let mut out = self.val(x.0).to_vec();
        for row in out.chunks_mut(n) {
            for (o, &bv) in row.iter_mut().zip(bias) {
                *o += bv;
            }
        }
        self.push(m, n, out, Op::AddBias(x.0, b.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let shape = self.shape(a);
        assert_eq!(shape, self.shape(b), "add shapes");
        let out = self
            .val(a.0)
            .iter()
            .zip(self.val(b.0))
            .map(|(&x, &y)| x + y)
            .collect();
        self.push(shape.0, shape.1, out, Op::Add(a.0, b.0))
    }

    /// Affine layer `x·w + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let y = self.matmul(x, w);
        self.add_bias(y, b)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let (m, n) = self.shape(x);
        let out = self.val(x.0).iter().map(|&v| gelu(v)).collect();
        self.push(m, n, out, Op::Gelu(x.0))
    }

    /// Row-wise layer normalization with gain `g` and shift `b` (both `1×n`).
    pub fn layer_norm(&mut self, x: Var, g: Var, b: Var) -> Var {
        let (m, n) = self.shape(x);
        assert_eq!(self.shape(g), (1, n));
        assert_eq!(self.shape(b), (1, n));
        let xs = self.val(x.0);
        let (gs, bs) = (self.val(g.0), self.val(b.0));
        let mut xhat = vec![S::zero(); m * n];
        let mut rstd = vec![S::zero(); m];
        let mut out = vec![S::zero(); m * n];
        for r in 0..m {
            let row = &xs[r * n..(r + 1) * n];
            let mean = row.iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd[r] = S::of(rs);
            for c in 0..n {
                let h = S::of((row[c].as_f64() - mean) * rs);
                xhat[r * n + c] = h;
                out[r * n + c] = h * gs[c] + bs[c];
            }
        }
        self.push(
            m,
            n,
            out,
            Op::LayerNorm {
                x: x.0,
                g: g.0,
                b: b.0,
                xhat,
                rstd,
            },
        )
    }

    /// Multi-head self-attention inside each segment. `qkv` packs `[Q | K | V]`
    /// along columns (`3·d` wide); the output is `d` wide, heads concatenated.
    pub fn attention(&mut self, qkv: Var, segments: &Segments, heads: usize) -> Var {
        let (rows, cols3) = self.shape(qkv);
        assert_eq!(cols3 % 3, 0);
        let d = cols3 / 3;
        assert_eq!(d % heads, 0, "model width must divide into heads");
        let dh = d / heads;
        let scale = S::of(1.0 / (dh as f64).sqrt());
        let x = self.val(qkv.0);
        let mut out = vec![S::zero(); rows * d];
        let prob_len: usize = segments.iter().map(|&(_, l)| l * l * heads).sum();
        let mut probs = vec![S::zero(); prob_len];
        let mut p_off = 0;
        for &(start, len) in segments.iter() {
            for h in 0..heads {
                let p = &mut probs[p_off..p_off + len * len];
                let q = View {
                    offset: start * cols3 + h * dh,
                    rs: cols3,
                    cs: 1,
                };
                let kt = View {
                    offset: start * cols3 + d + h * dh,
                    rs: 1,
                    cs: cols3,
                };
                gemm(
                    len,
                    dh,
                    len,
                    scale,
                    x,
                    q,
                    x,
                    kt,
                    S::zero(),
                    p,
                    View::rows(len),
                );
                for row in p.chunks_mut(len) {
                    let max = row.iter().fold(S::neg_infinity(), |a, &b| a.max(b));
                    let mut sum = S::zero();
                    for v in row.iter_mut() {
                        *v = (*v - max).exp();
                        sum += *v;
                    }
                    for v in row.iter_mut() {
                        *v = *v / sum;
                    }
                }
                let v = View {
                    offset: start * cols3 + 2 * d + h * dh,
                    rs: cols3,
                    cs: 1,
                };
                let o = View {
                    offset: start * d + h * dh,
                    rs: d,
                    cs: 1,
                };
                gemm(
                    len,
                    len,
                    dh,
                    S::one(),
                    p,
                    View::rows(len),
                    x,
                    v,
                    S::zero(),
                    &mut out,
                    o,
                );
                p_off += len * len;
            }
        }
        self.push(
            rows,
            d,
            out,
            Op::Attention {
                qkv: qkv.0,
                segments: segments.clone(),
                heads,
                probs,
            },
        )
    }

    /// Rows of a `V×n` table selected by `ids`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let (v, n) = self.shape(table);
        let t = self.val(table.0);
        let mut out = Vec::with_capacity(ids.len() * n);
        for &i in ids {
            assert!(i < v, "token id {i} outside table of {v}");
            out.extend_from_slice(&t[i * n..(i + 1) * n]);
        }
        self.push(
            ids.len(),
            n,
            out,
            Op::Gather {
                table: table.0,
                ids: ids.to_vec(),
            },
        )
    }

    /// Adds positional row `pos[positions[r]]` to every row `r` of `x`.
    pub fn add_positions(&mut self, x: Var, pos: Var, positions: &[usize]) -> Var {
        let (m, n) = self.shape(x);
        let (p_rows, p_cols) = self.shape(pos);
        assert_eq!(p_cols, n);
        assert_eq!(positions.len(), m);
        let p = self.val(pos.0);
        let mut out = self.val(x.0).to_vec();
        for (r, &pi) in positions.iter().enumerate() {
            assert!(pi < p_rows, "position {pi} beyond table");
            for c in 0..n {
                out[r * n + c] += p[pi * n + c];
            }
        }
        self.push(
            m,
            n,
            out,
            Op::AddPos {
                x: x.0,
                pos: pos.0,
                positions: positions.to_vec(),
            },
        )
    }

    /// Mean over the rows of each segment: one output row per segment.
    pub fn segment_mean(&mut self, x: Var, segments: &Segments) -> Var {
        let (_, n) = self.shape(x);
        let xs = self.val(x.0);
        let mut out = vec![S::zero(); segments.len() * n];
        for (s, &(start, len)) in segments.iter().enumerate() {
            let inv = S::of(1.0 / len as f64);
            for r in start..start + len {
                for c in 0..n {
                    out[s * n + c] += xs[r * n + c] * inv;
                }
            }
        }
        self.push(
            segments.len(),
            n,
            out,
            Op::SegmentMean {
                x: x.0,
                segments: segments.clone(),
            },
        )
    }

    /// Scales every row to unit L2 norm.
    pub fn l2_normalize(&mut self, x: Var) -> Var {
        let (m, n) = self.shape(x);
        let xs = self.val(x.0);
        let mut norms = vec![S::zero(); m];
        let mut out = vec![S::zero(); m * n];
        for r in 0..m {
            let row = &xs[r * n..(r + 1) * n];
            let norm = row
                .iter()
                .map(|v| v.as_f64() * v.as_f64())
                .sum::<f64>()
                .sqrt()
                .max(1e-12);
            norms[r] = S::of(norm);
            for c in 0..n {
                out[r * n + c] = S::of(row[c].as_f64() / norm);
            }
        }
        self.push(m, n, out, Op::L2Normalize { x: x.0, norms })
    }

    /// Back-propagates the given output gradients; returns one dense gradient
    /// per parameter (zeros for parameters the tape never touched).
    pub fn backward(&self, seeds: &[(Var, Vec<S>)]) -> Vec<Vec<S>> {
        let mut grads: Vec<Option<Vec<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (v, g) in seeds {
            let (r, c) = self.shape(*v);
            assert_eq!(g.len(), r * c, "seed gradient shape");
            accumulate(&mut grads, v.0, g, r * c);
        }
        let mut param_grads: Vec<Vec<S>> = self
            .params
            .specs
            .iter()
            .map(|s| vec![S::zero(); s.rows * s.cols])
            .collect();

        for id in (0..self.nodes.len()).rev() {
            let Some(dy) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            let (m, n) = (node.rows, node.cols);
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    for (a, b) in param_grads[*p].iter_mut().zip(&dy) {
                        *a += *b;
                    }
                }
                Op::MatMul(x, w) => {
                    let k = self.nodes[*x].cols;
                    // Inputs never need gradients; skipping them saves the
                    // largest GEMM of the image tower.
                    if !matches!(self.nodes[*x].op, Op::Input) {
                        let mut dx = vec![S::zero(); m * k];
                        gemm(
                            m,
                            n,
                            k,
                            S::one(),
                            &dy,
                            View::rows(n),
                            self.val(*w),
                            View::transposed(n),
                            S::zero(),
                            &mut dx,
                            View::rows(k),
                        );
                        add_into(&mut grads, *x, dx);
                    }
                    let mut dw = vec![S::zero(); k * n];
                    gemm(
                        k,
                        m,
                        n,
                        S::one(),
                        self.val(*x),
                        View::transposed(k),
                        &dy,
                        View::rows(n),
                        S::zero(),
                        &mut dw,
                        View::rows(n),
                    );
                    add_into(&mut grads, *w, dw);
                }
                Op::AddBias(x, b) => {
                    let mut db = vec![S::zero(); n];
                    for row in dy.chunks(n) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    add_into(&mut grads, *b, db);
                    add_into(&mut grads, *x, dy);
                }
                Op::Add(a, b) => {
                    add_into(&mut grads, *a, dy.clone());
                    add_into(&mut grads, *b, dy);
                }
                Op::Gelu(x) => {
                    let dx = self
                        .val(*x)
                        .iter()
                        .zip(&dy)
                        .map(|(&v, &g)| g * gelu_grad(v))
                        .collect();
                    add_into(&mut grads, *x, dx);
                }
                Op::LayerNorm {
                    x,
                    g,
                    b,
                    xhat,
                    rstd,
                } => {
                    let gs = self.val(*g);
                    let mut dg = vec![S::zero(); n];
                    let mut db = vec![S::zero(); n];
                    let mut dx = vec![S::zero(); m * n];
                    for r in 0..m {
                        let mut mean_dh = 0.0;
                        let mut mean_dh_h = 0.0;
                        for c in 0..n {
                            let i = r * n + c;
                            dg[c] += dy[i] * xhat[i];
                            db[c] += dy[i];
                            let dh = (dy[i] * gs[c]).as_f64();
                            mean_dh += dh;
                            mean_dh_h += dh * xhat[i].as_f64();
                        }
                        mean_dh /= n as f64;
                        mean_dh_h /= n as f64;
                        let rs = rstd[r].as_f64();
                        for c in 0..n {
                            let i = r * n + c;
                            let dh = (dy[i] * gs[c]).as_f64();
                            dx[i] = S::of(rs * (dh - mean_dh - xhat[i].as_f64() * mean_dh_h));
                        }
                    }
                    add_into(&mut grads, *x, dx);
                    add_into(&mut grads, *g, dg);
                    add_into(&mut grads, *b, db);
                }
                Op::Attention {
                    qkv,
                    segments,
                    heads,
                    probs,
                } => {
                    let d = n;
                    let cols3 = 3 * d;
                    let dh = d / heads;
                    let scale = S::of(1.0 / (dh as f64).sqrt());
                    let x = self.val(*qkv);
                    let mut dx = vec![S::zero(); m * cols3];
                    let mut p_off = 0;
                    for &(start, len) in segments.iter() {
                        let mut dp = vec![S::zero(); len * len];
                        for h in 0..*heads {
                            let p = &probs[p_off..p_off + len * len];
                            let d_o = View {
                                offset: start * d + h * dh,
                                rs: d,
                                cs: 1,
                            };
                            let q = View {
                                offset: start * cols3 + h * dh,
                                rs: cols3,
                                cs: 1,
                            };
                            let k = View {
                                offset: start * cols3 + d + h * dh,
                                rs: cols3,
                                cs: 1,
                            };
                            let v = View {
                                offset: start * cols3 + 2 * d + h * dh,
                                rs: cols3,
                                cs: 1,
                            };
                            let vt = View {
                                offset: v.offset,
                                rs: 1,
                                cs: cols3,
                            };
                            // dV = Pᵀ·dO
                            gemm(
                                len,
                                len,
                                dh,
                                S::one(),
                                p,
                                View::transposed(len),
                                &dy,
                                d_o,
                                S::zero(),
                                &mut dx,
                                v,
                            );
                            // dP = dO·Vᵀ
                            gemm(
                                len,
                                dh,
                                len,
                                S::one(),
                                &dy,
                                d_o,
                                x,
                                vt,
                                S::zero(),
                                &mut dp,
                                View::rows(len),
                            );
                            // dS = P ⊙ (dP − rowsum(dP ⊙ P))
                            for r in 0..len {
                                let row = r * len..(r + 1) * len;
                                let dot: S = p[row.clone()]
                                    .iter()
                                    .zip(&dp[row.clone()])
                                    .map(|(&a, &b)| a * b)
                                    .sum();
                                for i in row {
                                    dp[i] = p[i] * (dp[i] - dot);
                                }
                            }
                            // dQ = scale·dS·K ; dK = scale·dSᵀ·Q
                            gemm(
                                len,
                                len,
                                dh,
                                scale,
                                &dp,
                                View::rows(len),
                                x,
                                k,
                                S::zero(),
                                &mut dx,
                                q,
                            );
                            gemm(
                                len,
                                len,
                                dh,
                                scale,
                                &dp,
                                View::transposed(len),
                                x,
                                q,
                                S::zero(),
                                &mut dx,
                                k,
                            );
                            p_off += len * len;
                        }
                    }
                    add_into(&mut grads, *qkv, dx);
                }
                Op::Gather { table, ids } => {
                    let v = self.nodes[*table].rows;
                    let mut dt = vec![S::zero(); v * n];
                    for (r, &i) in ids.iter().enumerate() {
                        for c in 0..n {
                            dt[i * n + c] += dy[r * n + c];
                        }
                    }
                    add_into(&mut grads, *table, dt);
                }
                Op::AddPos { x, pos, positions } => {
                    let p_rows = self.nodes[*pos].rows;
                    let mut dp = vec![S::zero(); p_rows * n];
                    for (r, &pi) in positions.iter().enumerate() {
                        for c in 0..n {
                            dp[pi * n + c] += dy[r * n + c];
                        }
                    }
                    add_into(&mut grads, *pos, dp);
                    add_into(&mut grads, *x, dy);
                }
                Op::SegmentMean { x, segments } => {
                    let rows = self.nodes[*x].rows;
                    let mut dx = vec![S::zero(); rows * n];
                    for (s, &(start, len)) in segments.iter().enumerate() {
                        let inv = S::of(1.0 / len as f64);
                        for r in start..start + len {
                            for c in 0..n {
                                dx[r * n + c] = dy[s * n + c] * inv;
                            }
                        }
                    }
                    add_into(&mut grads, *x, dx);
                }
                Op::L2Normalize { x, norms } => {
                    let y = &node.value;
                    let mut dx = vec![S::zero(); m * n];
                    for r in 0..m {
                        let row = r * n..(r + 1) * n;
                        let dot: f64 = y[row.clone()]
                            .iter()
                            .zip(&dy[row.clone()])
                            .map(|(a, b)| a.as_f64() * b.as_f64())
                            .sum();
                        let norm = norms[r].as_f64();
                        for i in row {
                            dx[i] = S::of((dy[i].as_f64() - y[i].as_f64() * dot) / norm);
                        }
                    }
                    add_into(&mut grads, *x, dx);
                }
            }
        }
        param_grads
    }
}

fn accumulate<S: Scalar>(grads: &mut [Option<Vec<S>>], id: usize, g: &[S], len: usize) {
    match &mut grads[id] {
        Some(existing) => {
            for (a, &b) in existing.iter_mut().zip(g) {
                *a += b;
            }
        }
        slot @ None => {
            debug_assert_eq!(g.len(), len);
            *slot = Some(g.to_vec());
        }
    }
}

fn add_into<S: Scalar>(grads: &mut [Option<Vec<S>>], id: usize, g: Vec<S>) {
    match &mut grads[id] {
        Some(existing) => {
            for (a, b) in existing.iter_mut().zip(g) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
