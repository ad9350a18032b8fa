use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::optim::ParamVector;

/// Shape of the residual feature network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_units: usize,
    pub hidden_layers: usize,
    pub feature_dim: usize,
}

/// Offsets of the weight and bias blocks inside the flat parameter array.
/// Weights are row-major `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub input_w: usize,
    pub input_b: usize,
    pub blocks: Vec<(usize, usize)>,
    pub output_w: usize,
    pub output_b: usize,
    pub mean_w: usize,
    pub mean_b: usize,
    pub len: usize,
}

pub(crate) const INPUT: &str = "input";
pub(crate) const OUTPUT: &str = "output";
pub(crate) const MEAN: &str = "mean";

pub(crate) fn block_name(k: usize) -> String {
    format!("block{k}")
}

/// Per-layer activations of a batch, one column per example.
#[derive(Debug, Clone)]
pub(crate) struct Forward {
    /// `h_0 … h_L`, each `hidden_units × B`.
    pub hidden: Vec<DMatrix<f64>>,
    /// `ELU(h_k)` for `k < L`.
    pub acts: Vec<DMatrix<f64>>,
    /// Features, `feature_dim × B`.
    pub phi: DMatrix<f64>,
}

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

pub(crate) fn elu_slope(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// A row-major `out × in` weight block as an owned matrix.
fn weight(p: &[f64], offset: usize, out: usize, inp: usize) -> DMatrix<f64> {
    weight_t(p, offset, out, inp).transpose()
}

/// Transpose of a row-major `out × in` weight block (an `in × out` view).
fn weight_t(p: &[f64], offset: usize, out: usize, inp: usize) -> DMatrixView<'_, f64> {
    DMatrixView::from_slice(&p[offset..offset + out * inp], inp, out)
}

fn weight_t_mut(p: &mut [f64], offset: usize, out: usize, inp: usize) -> DMatrixViewMut<'_, f64> {
    DMatrixViewMut::from_slice(&mut p[offset..offset + out * inp], inp, out)
}

/// `W·a + b` for every column of `a`.
fn affine(p: &[f64], w: usize, b: usize, out: usize, inp: usize, a: &DMatrix<f64>) -> DMatrix<f64> {
    let bias = &p[b..b + out];
    let mut h = DMatrix::from_fn(out, a.ncols(), |r, _| bias[r]);
    h.gemm(1.0, &weight(p, w, out, inp), a, 1.0);
    h
}

/// Accumulates `dW += δ·aᵀ` and `db += Σ_columns δ`.
fn accumulate(grad: &mut [f64], w: usize, b: usize, out: usize, inp: usize, delta: &DMatrix<f64>, a: &DMatrix<f64>) {
    weight_t_mut(grad, w, out, inp).gemm(1.0, a, &delta.transpose(), 1.0);
    for col in delta.column_iter() {
        for (g, d) in grad[b..b + out].iter_mut().zip(col.iter()) {
            *g += d;
        }
    }
}

impl Architecture {
    pub(crate) fn layout(&self) -> Layout {
        let (h, d, n) = (self.hidden_units, self.feature_dim, self.input_dim);
        let mut at = 0;
        let mut take = |len: usize| {
            let o = at;
            at += len;
            o
        };
        let input_w = take(h * n);
        let input_b = take(h);
        let blocks = (0..self.hidden_layers).map(|_| (take(h * h), take(h))).collect();
        let output_w = take(d * h);
        let output_b = take(d);
        let mean_w = take(d);
        let mean_b = take(1);
        Layout { input_w, input_b, blocks, output_w, output_b, mean_w, mean_b, len: at }
    }

    /// Number of network parameters (excluding task embeddings).
    pub fn n_params(&self) -> usize {
        self.layout().len
    }

    /// Parameters initialised like a default fully connected layer:
    /// weights and biases uniform in `±1/√fan_in`.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let (h, d, n) = (self.hidden_units, self.feature_dim, self.input_dim);
        let mut p = ParamVector::new();
        let layer = |p: &mut ParamVector, name: &str, out: usize, inp: usize, rng: &mut R| {
            let bound = 1.0 / (inp as f64).sqrt();
            p.push_segment(&format!("{name}.weight"), out, inp, |_| rng.random_range(-bound..bound));
            p.push_segment(&format!("{name}.bias"), out, 1, |_| rng.random_range(-bound..bound));
        };
        layer(&mut p, INPUT, h, n, rng);
        for k in 0..self.hidden_layers {
            layer(&mut p, &block_name(k), h, h, rng);
        }
        layer(&mut p, OUTPUT, d, h, rng);
        layer(&mut p, MEAN, 1, d, rng);
        debug_assert_eq!(p.len(), self.n_params());
        p
    }

    /// Runs the feature network on the columns of `x` (`input_dim × B`).
    pub(crate) fn forward(&self, layout: &Layout, p: &[f64], x: &DMatrix<f64>) -> Forward {
        let (h, d, n) = (self.hidden_units, self.feature_dim, self.input_dim);
        let mut hidden = Vec::with_capacity(self.hidden_layers + 1);
        let mut acts = Vec::with_capacity(self.hidden_layers);
        hidden.push(affine(p, layout.input_w, layout.input_b, h, n, x));
        for &(w, b) in &layout.blocks {
            let last = hidden.last().unwrap();
            let a = last.map(elu);
            let next = affine(p, w, b, h, h, &a) + last;
            acts.push(a);
            hidden.push(next);
        }
        let phi = affine(p, layout.output_w, layout.output_b, d, h, hidden.last().unwrap());
        Forward { hidden, acts, phi }
    }

    /// Mean-layer logits `m(Φ)` for every column of `phi`.
    pub(crate) fn mean_logits(&self, layout: &Layout, p: &[f64], phi: &DMatrix<f64>) -> Vec<f64> {
        let w = &p[layout.mean_w..layout.mean_w + self.feature_dim];
        let b = p[layout.mean_b];
        phi.column_iter().map(|c| b + c.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).collect()
    }

    /// Backpropagates `dphi = ∂L/∂Φ` through the feature network, adding the
    /// parameter gradient to `grad`.
    pub(crate) fn backward(&self, layout: &Layout, p: &[f64], x: &DMatrix<f64>, fwd: &Forward, dphi: &DMatrix<f64>, grad: &mut [f64]) {
        let (h, d, n) = (self.hidden_units, self.feature_dim, self.input_dim);
        let l = self.hidden_layers;
        accumulate(grad, layout.output_w, layout.output_b, d, h, dphi, &fwd.hidden[l]);
        let mut delta = weight_t(p, layout.output_w, d, h) * dphi;
        for k in (0..l).rev() {
            let (w, b) = layout.blocks[k];
            accumulate(grad, w, b, h, h, &delta, &fwd.acts[k]);
            let mut da = weight_t(p, w, h, h) * &delta;
            da.zip_zip_apply(&fwd.hidden[k], &fwd.acts[k], |g, hk, ak| {
                if hk <= 0.0 {
                    *g *= ak + 1.0;
                }
            });
            delta += da;
        }
        accumulate(grad, layout.input_w, layout.input_b, h, n, &delta, x);
    }

    /// Jacobian `∂Φ/∂x` (`feature_dim × input_dim`) at a single point.
    pub(crate) fn jacobian(&self, layout: &Layout, p: &[f64], x: &[f64]) -> DMatrix<f64> {
        let (h, d, n) = (self.hidden_units, self.feature_dim, self.input_dim);
        let xm = DMatrix::from_column_slice(n, 1, x);
        let fwd = self.forward(layout, p, &xm);
        let mut j = weight(p, layout.input_w, h, n);
        for (k, &(w, _)) in layout.blocks.iter().enumerate() {
            let mut scaled = j.clone();
            for (r, mut row) in scaled.row_iter_mut().enumerate() {
                row *= elu_slope(fwd.hidden[k][(r, 0)]);
            }
            j += weight(p, w, h, h) * scaled;
        }
        weight(p, layout.output_w, d, h) * j
    }
}
