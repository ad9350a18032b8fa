//! Numerical self-checks run by `malibo selftest`.

use malibo::adapt::{probit, AdaptProblem};
use malibo::meta::{Architecture, Examples, MetaObjective};
use malibo::optim::{central_differences, grad, max_relative_error, Differentiable, LbfgsConfig};
use malibo::stats::sigmoid;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

type Rng64 = malibo::rng::Rng;

/// Analytic meta-loss gradients against central differences.
pub fn gradient_check(instances: usize, seed: u64) -> Check {
    const TOL: f64 = 1e-4;
    let mut rng = Rng64::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let t = rng.random_range(2..=3);
        let dim = rng.random_range(1..=3);
        let arch = Architecture { input_dim: dim, hidden_units: 8, hidden_layers: 2, feature_dim: 3 };
        let pts: Vec<Vec<f64>> = (0..t * 16).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        let items: Vec<(usize, &[f64], f64)> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| (i / 16, p.as_slice(), if rng.random_bool(0.35) { rng.random_range(0.05..2.0) } else { 0.0 }))
            .collect();
        let ex = Examples::new(dim, t, &items).expect("valid instance");
        let mut params = arch.init_params(&mut rng).as_slice().to_vec();
        params.extend((0..t * arch.feature_dim).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
        let obj = MetaObjective::new(arch, t, &ex, 0.1, rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
        let Ok(g) = grad(&obj, &params) else {
            return Check { name: "gradient", passed: false, detail: "non-finite gradient".into() };
        };
        let fd = central_differences(|p| obj.value(p), &params, 1e-6);
        worst = worst.max(max_relative_error(&g, &fd, 1e-5));
    }
    Check { name: "gradient", passed: worst < TOL, detail: format!("max relative error {worst:.2e} over {instances} instances (tol {TOL:e})") }
}

/// Probit predictive under the Laplace posterior against dense-grid
/// integration of the exact posterior on a two-dimensional toy task.
pub fn laplace_check(tasks: usize, seed: u64) -> Check {
    const TOL: f64 = 0.05;
    const GRID: usize = 241;
    let mut rng = Rng64::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..tasks {
        let n = 20;
        let phi = DMatrix::from_fn(2, n, |_, _| rng.random_range(-1.5..1.5));
        let mean = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let weights = (0..n).map(|_| if rng.random_bool(0.35) { rng.random_range(0.1..2.0) } else { 0.0 }).collect();
        let p = AdaptProblem { phi, mean, weights };
        let map = p.map_estimate(&LbfgsConfig::default());
        let Ok(post) = p.laplace(map.z.clone()) else {
            return Check { name: "laplace", passed: false, detail: "precision did not factorise".into() };
        };
        // grid of ±8 posterior standard deviations around the mode
        let half: Vec<f64> = (0..2).map(|i| 8.0 * post.covariance[(i, i)].sqrt()).collect();
        let axis = |i: usize, k: usize| map.z[i] - half[i] + 2.0 * half[i] * k as f64 / (GRID - 1) as f64;
        let mut zs = Vec::with_capacity(GRID * GRID);
        let mut logw = Vec::with_capacity(GRID * GRID);
        for a in 0..GRID {
            for b in 0..GRID {
                let z = [axis(0, a), axis(1, b)];
                logw.push(-p.objective(&z));
                zs.push(z);
            }
        }
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        for _ in 0..100 {
            let f = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let m = rng.random_range(-0.5..0.5);
            let exact: f64 = zs.iter().zip(&w).map(|(z, w)| w * sigmoid(m + z[0] * f[0] + z[1] * f[1])).sum::<f64>() / total;
            let (mu, var) = post.logit_moments(m, &f);
            worst = worst.max((probit(mu, var) - exact).abs());
        }
    }
    Check { name: "laplace", passed: worst < TOL, detail: format!("max |probit - grid| {worst:.4} over {tasks}x100 points (tol {TOL})") }
}

/// The probit formula against Monte-Carlo estimates of `E[σ(a)]`.
pub fn probit_check(draws: usize, seed: u64) -> Check {
    const TOL: f64 = 0.02;
    let mut rng = Rng64::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for mu in -4..=4 {
        for var in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 10.0] {
            let sd = f64::sqrt(var);
            let mc = (0..draws).map(|_| sigmoid(mu as f64 + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))).sum::<f64>() / draws as f64;
            worst = worst.max((probit(mu as f64, var) - mc).abs());
        }
    }
    Check { name: "probit", passed: worst <= TOL, detail: format!("max |probit - MC({draws})| {worst:.4} (tol {TOL})") }
}

/// All checks at their default sizes.
pub fn run_all() -> Vec<Check> {
    vec![gradient_check(20, 1), laplace_check(3, 2), probit_check(1_000_000, 3)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_checks_pass() {
        assert!(gradient_check(2, 7).passed);
        assert!(laplace_check(1, 8).passed);
        let c = probit_check(20_000, 9);
        assert!(c.passed, "{c}");
        assert!(c.to_string().starts_with("[PASS] probit"));
    }
}
