use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dimension, SearchSpace};

/// Hartmann 3-D exponents.
pub const HARTMANN3_A: [[f64; 3]; 4] = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]];

/// Hartmann 3-D centres.
pub const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];

/// Canonical Hartmann 3-D mixing weights.
pub const HARTMANN3_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

/// A synthetic function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Forrester,
    Quadratic,
    Branin,
    Hartmann3d,
}

/// One member of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SyntheticFunction {
    /// `a(6x − 2)² sin(12x − 4) + b(x − 0.5) − c` on `[0, 1]`.
    Forrester { a: f64, b: f64, c: f64 },
    /// `(a(x − b))² − c` on `[0, 1]`.
    Quadratic { a: f64, b: f64, c: f64 },
    /// `a(x₂ − b·x₁² + c·x₁ − r)² + s(1 − t)cos(x₁) + s` on
    /// `[−5, 10] × [0, 15]`.
    Branin { a: f64, b: f64, c: f64, r: f64, s: f64, t: f64 },
    /// `−Σ_i α_i exp(−Σ_j A_ij (x_j − P_ij)²)` on `[0, 1]³`.
    Hartmann3d { alpha: [f64; 4] },
}

/// Parameter ranges `(name, lo, hi)` of each family.
pub fn parameter_ranges(family: Family) -> &'static [(&'static str, f64, f64)] {
    match family {
        Family::Forrester => &[("a", 0.2, 3.0), ("b", -5.0, 15.0), ("c", -5.0, 5.0)],
        Family::Quadratic => &[("a", 0.5, 1.5), ("b", -0.9, 0.9), ("c", -1.0, 1.0)],
        Family::Branin => &[
            ("a", 0.5, 1.5),
            ("b", 0.1, 0.15),
            ("c", 1.0, 2.0),
            ("r", 5.0, 7.0),
            ("s", 8.0, 12.0),
            ("t", 0.03, 0.05),
        ],
        Family::Hartmann3d => &[("alpha1", 0.0, 2.0), ("alpha2", 0.0, 2.0), ("alpha3", 2.0, 4.0), ("alpha4", 2.0, 4.0)],
    }
}

impl Family {
    /// The raw search space of the family.
    pub fn space(self) -> SearchSpace {
        let c = |lo, hi| Dimension::Continuous { lo, hi };
        let dims = match self {
            Family::Forrester | Family::Quadratic => vec![c(0.0, 1.0)],
            Family::Branin => vec![c(-5.0, 10.0), c(0.0, 15.0)],
            Family::Hartmann3d => vec![c(0.0, 1.0); 3],
        };
        SearchSpace::new(dims).expect("static bounds are valid")
    }

    pub fn dim(self) -> usize {
        match self {
            Family::Forrester | Family::Quadratic => 1,
            Family::Branin => 2,
            Family::Hartmann3d => 3,
        }
    }

    /// Draws a member with every parameter uniform on its range.
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> SyntheticFunction {
        let p: Vec<f64> = parameter_ranges(self).iter().map(|(_, lo, hi)| rng.random_range(*lo..*hi)).collect();
        SyntheticFunction::from_params(self, &p)
    }
}

impl SyntheticFunction {
    /// Builds a member from parameters ordered as in [`parameter_ranges`].
    pub fn from_params(family: Family, p: &[f64]) -> Self {
        assert_eq!(p.len(), parameter_ranges(family).len(), "parameter count");
        match family {
            Family::Forrester => SyntheticFunction::Forrester { a: p[0], b: p[1], c: p[2] },
            Family::Quadratic => SyntheticFunction::Quadratic { a: p[0], b: p[1], c: p[2] },
            Family::Branin => SyntheticFunction::Branin { a: p[0], b: p[1], c: p[2], r: p[3], s: p[4], t: p[5] },
            Family::Hartmann3d => SyntheticFunction::Hartmann3d { alpha: [p[0], p[1], p[2], p[3]] },
        }
    }

    /// The textbook Branin function.
    pub fn canonical_branin() -> Self {
        SyntheticFunction::Branin { a: 1.0, b: 5.1 / (4.0 * PI * PI), c: 5.0 / PI, r: 6.0, s: 10.0, t: 1.0 / (8.0 * PI) }
    }

    pub fn canonical_hartmann3() -> Self {
        SyntheticFunction::Hartmann3d { alpha: HARTMANN3_ALPHA }
    }

    pub fn family(&self) -> Family {
        match self {
            SyntheticFunction::Forrester { .. } => Family::Forrester,
            SyntheticFunction::Quadratic { .. } => Family::Quadratic,
            SyntheticFunction::Branin { .. } => Family::Branin,
            SyntheticFunction::Hartmann3d { .. } => Family::Hartmann3d,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            SyntheticFunction::Forrester { a, b, c } | SyntheticFunction::Quadratic { a, b, c } => vec![a, b, c],
            SyntheticFunction::Branin { a, b, c, r, s, t } => vec![a, b, c, r, s, t],
            SyntheticFunction::Hartmann3d { alpha } => alpha.to_vec(),
        }
    }

    /// Value at a raw point.
    pub fn eval_raw(&self, x: &[f64]) -> f64 {
        match *self {
            SyntheticFunction::Forrester { a, b, c } => {
                let x = x[0];
                a * (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin() + b * (x - 0.5) - c
            }
            SyntheticFunction::Quadratic { a, b, c } => (a * (x[0] - b)).powi(2) - c,
            SyntheticFunction::Branin { a, b, c, r, s, t } => {
                let (x1, x2) = (x[0], x[1]);
                a * (x2 - b * x1 * x1 + c * x1 - r).powi(2) + s * (1.0 - t) * x1.cos() + s
            }
            SyntheticFunction::Hartmann3d { alpha } => -(0..4)
                .map(|i| {
                    let e: f64 = (0..3).map(|j| HARTMANN3_A[i][j] * (x[j] - HARTMANN3_P[i][j]).powi(2)).sum();
                    alpha[i] * (-e).exp()
                })
                .sum::<f64>(),
        }
    }

    /// Value at a point encoded in the unit cube.
    pub fn eval(&self, encoded: &[f64]) -> f64 {
        match self {
            SyntheticFunction::Branin { .. } => self.eval_raw(&[-5.0 + 15.0 * encoded[0], 15.0 * encoded[1]]),
            _ => self.eval_raw(encoded),
        }
    }

    /// Estimates `(min, max)` over the unit cube by a dense grid followed by
    /// a compass search from the best grid point of each kind.
    pub fn extrema(&self) -> (f64, f64) {
        let dim = self.family().dim();
        let per_axis = match dim {
            1 => 10_001,
            2 => 201,
            _ => 47,
        };
        let mut best_lo = (f64::INFINITY, vec![0.0; dim]);
        let mut best_hi = (f64::NEG_INFINITY, vec![0.0; dim]);
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        loop {
            for k in 0..dim {
                x[k] = idx[k] as f64 / (per_axis - 1) as f64;
            }
            let v = self.eval(&x);
            if v < best_lo.0 {
                best_lo = (v, x.clone());
            }
            if v > best_hi.0 {
                best_hi = (v, x.clone());
            }
            let mut k = 0;
            while k < dim {
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == dim {
                break;
            }
        }
        let step = 1.0 / (per_axis - 1) as f64;
        let lo = compass_search(|p| self.eval(p), best_lo.1, step);
        let hi = -compass_search(|p| -self.eval(p), best_hi.1, step);
        (lo.min(best_lo.0), hi.max(best_hi.0))
    }
}

/// Minimises `f` over the unit cube from `x` with a shrinking compass search.
fn compass_search(f: impl Fn(&[f64]) -> f64, mut x: Vec<f64>, mut step: f64) -> f64 {
    let mut fx = f(&x);
    let mut trial = x.clone();
    while step > 1e-12 {
        let mut improved = false;
        for k in 0..x.len() {
            for dir in [-1.0, 1.0] {
                trial.copy_from_slice(&x);
                trial[k] = (x[k] + dir * step).clamp(0.0, 1.0);
                let ft = f(&trial);
                if ft < fx {
                    fx = ft;
                    x.copy_from_slice(&trial);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    fx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn forrester_reference_value() {
        let f = SyntheticFunction::Forrester { a: 0.5, b: 10.0, c: -5.0 };
        let want = 2.0 * (-4.0f64).sin();
        assert!((f.eval(&[0.0]) - want).abs() < 1e-14);
        assert!((f.eval(&[0.0]) - 1.5136).abs() < 1e-4);
    }

    #[test]
    fn quadratic_vertex() {
        let f = SyntheticFunction::Quadratic { a: 1.3, b: 0.4, c: 0.7 };
        assert_eq!(f.eval(&[0.4]), -0.7);
        let (lo, _) = f.extrema();
        assert!((lo + 0.7).abs() < 1e-12);
    }

    #[test]
    fn hartmann_constants() {
        assert_eq!(HARTMANN3_A[1], [0.1, 10.0, 35.0]);
        assert_eq!(HARTMANN3_P[0], [0.3689, 0.1170, 0.2673]);
        assert_eq!(HARTMANN3_P[3], [0.0381, 0.5743, 0.8828]);
    }

    #[test]
    fn hartmann_canonical_minimum() {
        let f = SyntheticFunction::canonical_hartmann3();
        let at = f.eval(&[0.114614, 0.555649, 0.852547]);
        assert!((at + 3.86278).abs() < 1e-4, "{at}");
        let (lo, _) = f.extrema();
        assert!((lo + 3.86278).abs() < 1e-4, "{lo}");
    }

    #[test]
    fn branin_canonical_minima() {
        let f = SyntheticFunction::canonical_branin();
        for (x1, x2) in [(-PI, 12.275), (PI, 2.275), (9.42478, 2.475)] {
            assert!((f.eval_raw(&[x1, x2]) - 0.397887).abs() < 1e-5);
        }
        let (lo, _) = f.extrema();
        assert!((lo - 0.397887).abs() < 1e-5, "{lo}");
        for (name, lo, hi) in parameter_ranges(Family::Branin) {
            let v = f.params()[parameter_ranges(Family::Branin).iter().position(|p| p.0 == *name).unwrap()];
            assert!(*lo <= v && v <= *hi, "{name}");
        }
    }

    #[test]
    fn sampled_parameters_stay_in_range() {
        let mut rng = crate::rng::Rng::seed_from_u64(0);
        for family in [Family::Forrester, Family::Quadratic, Family::Branin, Family::Hartmann3d] {
            for _ in 0..10_000 {
                let f = family.sample(&mut rng);
                assert_eq!(f.family(), family);
                for (v, (_, lo, hi)) in f.params().iter().zip(parameter_ranges(family)) {
                    assert!(lo <= v && v <= hi);
                }
            }
        }
    }

    #[test]
    fn extrema_bound_random_evaluations() {
        let mut rng = crate::rng::Rng::seed_from_u64(1);
        for family in [Family::Forrester, Family::Branin, Family::Hartmann3d] {
            let f = family.sample(&mut rng);
            let (lo, hi) = f.extrema();
            for _ in 0..2000 {
                let x: Vec<f64> = (0..family.dim()).map(|_| rng.random()).collect();
                let v = f.eval(&x);
                assert!(lo <= v + 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
