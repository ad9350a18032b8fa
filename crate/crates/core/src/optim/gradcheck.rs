use crate::{Error, Result};

/// A scalar function with an analytic gradient.
pub trait Differentiable {
    fn dim(&self) -> usize;

    fn value(&self, p: &[f64]) -> f64;

    /// Writes the gradient into `grad` and returns the value.
    fn value_grad(&self, p: &[f64], grad: &mut [f64]) -> f64;
}

/// Analytic gradient of `f` at `at`, rejecting non-finite results.
pub fn grad<F: Differentiable + ?Sized>(f: &F, at: &[f64]) -> Result<Vec<f64>> {
    if at.len() != f.dim() {
        return Err(Error::Arity { expected: f.dim(), got: at.len() });
    }
    let mut g = vec![0.0; at.len()];
    let v = f.value_grad(at, &mut g);
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("objective value {v}")));
    }
    if let Some(i) = g.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("gradient component {i}")));
    }
    Ok(g)
}

/// Central finite differences `(f(p + h e_i) − f(p − h e_i)) / 2h`.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    let mut p = at.to_vec();
    (0..at.len())
        .map(|i| {
            let x = p[i];
            p[i] = x + h;
            let up = f(&p);
            p[i] = x - h;
            let down = f(&p);
            p[i] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_i |a_i − b_i| / max(|a_i|, |b_i|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::sigmoid;

    struct HalfSquaredNorm(usize);

    impl Differentiable for HalfSquaredNorm {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, p: &[f64]) -> f64 {
            0.5 * p.iter().map(|v| v * v).sum::<f64>()
        }
        fn value_grad(&self, p: &[f64], g: &mut [f64]) -> f64 {
            g.copy_from_slice(p);
            self.value(p)
        }
    }

    struct FirstSigmoid;

    impl Differentiable for FirstSigmoid {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, p: &[f64]) -> f64 {
            sigmoid(p[0])
        }
        fn value_grad(&self, p: &[f64], g: &mut [f64]) -> f64 {
            let s = sigmoid(p[0]);
            g[0] = s * (1.0 - s);
            g[1] = 0.0;
            s
        }
    }

    #[test]
    fn half_squared_norm_gradient_is_identity() {
        let p = [1.5, -2.0, 0.25];
        assert_eq!(grad(&HalfSquaredNorm(3), &p).unwrap(), p.to_vec());
    }

    #[test]
    fn sigmoid_slope_at_zero() {
        let g = grad(&FirstSigmoid, &[0.0, 3.0]).unwrap();
        assert_eq!(g, vec![0.25, 0.0]);
        let fd = central_differences(|p| FirstSigmoid.value(p), &[0.3, 1.0], 1e-5);
        let an = grad(&FirstSigmoid, &[0.3, 1.0]).unwrap();
        assert!(max_relative_error(&fd, &an, 1e-8) < 1e-8);
    }

    #[test]
    fn arity_and_non_finite_errors() {
        assert!(grad(&HalfSquaredNorm(2), &[1.0]).is_err());
        assert!(matches!(grad(&HalfSquaredNorm(1), &[f64::INFINITY]), Err(Error::NonFinite(_))));
    }
}
