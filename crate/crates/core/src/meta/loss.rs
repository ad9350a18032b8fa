use nalgebra::DMatrix;

use super::network::{Architecture, Layout};
use super::regularizer::regularizer_terms;
use crate::optim::Differentiable;
use crate::stats::{sigmoid, softplus};
use crate::{Error, Result};

/// Labelled meta-training examples, one column of `x` per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Examples {
    pub x: DMatrix<f64>,
    /// Row of the embedding matrix each example belongs to.
    pub task: Vec<usize>,
    pub weights: Vec<f64>,
    /// `1/(T·N_t)` for the example's task, so that summing `coef·ℓ` over all
    /// examples averages per task and then across tasks.
    pub coef: Vec<f64>,
}

impl Examples {
    /// Builds examples from `(task, point, weight)` triples over `n_tasks`
    /// tasks. Coefficients are derived from the per-task counts present.
    pub fn new(input_dim: usize, n_tasks: usize, items: &[(usize, &[f64], f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n_tasks];
        let mut x = DMatrix::zeros(input_dim, items.len());
        for (i, (t, p, _)) in items.iter().enumerate() {
            if *t >= n_tasks {
                return Err(Error::InvalidArgument(format!("task index {t} out of range")));
            }
            if p.len() != input_dim {
                return Err(Error::Arity { expected: input_dim, got: p.len() });
            }
            counts[*t] += 1;
            x.column_mut(i).copy_from_slice(p);
        }
        let coef = items.iter().map(|(t, _, _)| 1.0 / (n_tasks * counts[*t]) as f64).collect();
        Ok(Examples {
            x,
            task: items.iter().map(|(t, _, _)| *t).collect(),
            weights: items.iter().map(|(_, _, w)| *w).collect(),
            coef,
        })
    }

    pub fn len(&self) -> usize {
        self.task.len()
    }

    pub fn is_empty(&self) -> bool {
        self.task.is_empty()
    }
}

/// Per-example weighted classification loss `−[w·ln σ(s) + ln(1 − σ(s))]`.
pub fn weighted_bce(s: f64, w: f64) -> f64 {
    w * softplus(-s) + softplus(s)
}

/// Its derivative with respect to the logit, `(w + 1)σ(s) − w`.
pub fn weighted_bce_slope(s: f64, w: f64) -> f64 {
    (w + 1.0) * sigmoid(s) - w
}

/// The regularised meta-loss over network parameters and task embeddings.
///
/// The parameter vector is the network parameters followed by the row-major
/// `T × d` embedding matrix.
#[derive(Debug, Clone)]
pub struct MetaObjective<'a> {
    arch: Architecture,
    layout: Layout,
    n_tasks: usize,
    examples: &'a Examples,
    lambda: f64,
    lambda_ks: f64,
    lambda_cov: f64,
}

impl<'a> MetaObjective<'a> {
    pub fn new(arch: Architecture, n_tasks: usize, examples: &'a Examples, lambda: f64, lambda_ks: f64, lambda_cov: f64) -> Self {
        MetaObjective { arch, layout: arch.layout(), n_tasks, examples, lambda, lambda_ks, lambda_cov }
    }

    pub fn n_params(&self) -> usize {
        self.layout.len + self.n_tasks * self.arch.feature_dim
    }

    /// `λ·R(Z)`; zero with fewer than two tasks.
    fn regularizer(&self, z: &[f64], grad: Option<&mut [f64]>) -> f64 {
        if self.n_tasks < 2 || self.lambda == 0.0 {
            return 0.0;
        }
        let (t, d) = (self.n_tasks, self.arch.feature_dim);
        let grad = grad.map(|g| (g, self.lambda_ks, self.lambda_cov, self.lambda));
        let terms = regularizer_terms(z, t, d, grad).expect("embedding shape checked");
        self.lambda * (self.lambda_ks * terms.ks + self.lambda_cov * terms.cov)
    }

    /// Loss on the examples `idx` (all when `None`), with the data term
    /// multiplied by `scale`. The gradient is added to `grad` when given.
    pub fn evaluate(&self, params: &[f64], idx: Option<&[usize]>, scale: f64, mut grad: Option<&mut [f64]>) -> f64 {
        let (lay, d) = (&self.layout, self.arch.feature_dim);
        let (omega, z) = params.split_at(lay.len);
        let ex = self.examples;
        let gathered;
        let (x, rows): (&DMatrix<f64>, Vec<usize>) = match idx {
            Some(idx) => {
                gathered = ex.x.select_columns(idx);
                (&gathered, idx.to_vec())
            }
            None => (&ex.x, (0..ex.len()).collect()),
        };
        if rows.is_empty() {
            return self.regularizer(z, grad.as_deref_mut().map(|g| &mut g[lay.len..]));
        }
        let fwd = self.arch.forward(lay, omega, x);
        let means = self.arch.mean_logits(lay, omega, &fwd.phi);
        let wm = &omega[lay.mean_w..lay.mean_w + d];

        let mut loss = 0.0;
        let mut dphi = grad.as_ref().map(|_| DMatrix::zeros(d, rows.len()));
        let mut mean_grad = vec![0.0; d + 1];
        let mut z_grad = vec![0.0; z.len()];
        for (col, &i) in rows.iter().enumerate() {
            let t = ex.task[i];
            let zt = &z[t * d..(t + 1) * d];
            let phi = fwd.phi.column(col);
            let s = means[col] + phi.iter().zip(zt).map(|(a, b)| a * b).sum::<f64>();
            let c = ex.coef[i] * scale;
            loss += c * weighted_bce(s, ex.weights[i]);
            if let Some(dp) = dphi.as_mut() {
                let ds = c * weighted_bce_slope(s, ex.weights[i]);
                for k in 0..d {
                    dp[(k, col)] = ds * (wm[k] + zt[k]);
                    mean_grad[k] += ds * phi[k];
                    z_grad[t * d + k] += ds * phi[k];
                }
                mean_grad[d] += ds;
            }
        }
        if let (Some(g), Some(dp)) = (grad.as_deref_mut(), dphi) {
            self.arch.backward(lay, omega, x, &fwd, &dp, g);
            for k in 0..d {
                g[lay.mean_w + k] += mean_grad[k];
            }
            g[lay.mean_b] += mean_grad[d];
            for (a, b) in g[lay.len..].iter_mut().zip(&z_grad) {
                *a += b;
            }
        }
        loss + self.regularizer(z, grad.map(|g| &mut g[lay.len..]))
    }
}

impl Differentiable for MetaObjective<'_> {
    fn dim(&self) -> usize {
        self.n_params()
    }

    fn value(&self, p: &[f64]) -> f64 {
        self.evaluate(p, None, 1.0, None)
    }

    fn value_grad(&self, p: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.evaluate(p, None, 1.0, Some(grad))
    }
}
