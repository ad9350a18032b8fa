use serde::{Deserialize, Serialize};

/// Sufficient-decrease constant of the strong-Wolfe conditions.
pub const ARMIJO_C1: f64 = 1e-4;
/// Curvature constant of the strong-Wolfe conditions.
pub const CURVATURE_C2: f64 = 0.9;
const MAX_LINE_SEARCH: usize = 25;

/// L-BFGS settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    pub lr: f64,
    /// Iterations per outer call.
    pub max_iter: usize,
    /// Function evaluations per outer call; defaults to `1.25 · max_iter`.
    pub max_eval: Option<usize>,
    pub tol_grad: f64,
    pub tol_change: f64,
    pub history: usize,
    /// Number of outer calls. Curvature history carries over between calls.
    pub outer_loops: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            lr: 1.0,
            max_iter: 20,
            max_eval: None,
            tol_grad: 1e-7,
            tol_change: 1e-9,
            history: 100,
            outer_loops: 1,
        }
    }
}

/// Outcome of [`lbfgs_minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    /// Best iterate seen (never worse than the start).
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// A gradient or change tolerance was met.
    pub converged: bool,
    /// At least one line search ended without satisfying strong Wolfe.
    pub line_search_failed: bool,
}

/// Outcome of one strong-Wolfe line search along `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub t: f64,
    pub f: f64,
    pub g: Vec<f64>,
    pub evaluations: usize,
    /// Both Wolfe conditions hold at `t`.
    pub satisfied: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimiser of the cubic interpolating `(x1, f1, g1)` and `(x2, f2, g2)`,
/// clamped to `bounds` (default: the interval between the two points).
fn cubic_interpolate(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64, bounds: Option<(f64, f64)>) -> f64 {
    let (lo, hi) = bounds.unwrap_or(if x1 <= x2 { (x1, x2) } else { (x2, x1) });
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_sq = d1 * d1 - g1 * g2;
    if d2_sq >= 0.0 {
        let d2 = d2_sq.sqrt();
        let min_pos = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if min_pos.is_nan() {
            return 0.5 * (lo + hi);
        }
        min_pos.max(lo).min(hi)
    } else {
        0.5 * (lo + hi)
    }
}

/// Strong-Wolfe line search (bracketing + cubic zoom) for `f` along `d` from
/// `x`, starting at step `t`. `f0`, `g0`, `gtd0` describe the start point.
#[allow(clippy::too_many_arguments)]
pub fn strong_wolfe<F>(
    f: &mut F,
    x: &[f64],
    mut t: f64,
    d: &[f64],
    f0: f64,
    g0: &[f64],
    gtd0: f64,
    tol_change: f64,
) -> LineSearchResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let d_norm = inf_norm(d);
    let mut xt = vec![0.0; n];
    let mut eval = |t: f64, g: &mut Vec<f64>| -> f64 {
        for i in 0..n {
            xt[i] = x[i] + t * d[i];
        }
        f(&xt, g)
    };

    let mut g_new = vec![0.0; n];
    let mut f_new = eval(t, &mut g_new);
    let mut evals = 1;
    let mut gtd_new = dot(&g_new, d);

    let (mut t_prev, mut f_prev, mut g_prev, mut gtd_prev) = (0.0, f0, g0.to_vec(), gtd0);
    let mut done = false;
    let mut ls_iter = 0;
    // bracket entries: (t, f, g, gtd)
    let mut bracket: Vec<(f64, f64, Vec<f64>, f64)>;

    loop {
        if ls_iter >= MAX_LINE_SEARCH {
            bracket = vec![(0.0, f0, g0.to_vec(), gtd0), (t, f_new, g_new.clone(), gtd_new)];
            break;
        }
        if f_new > f0 + ARMIJO_C1 * t * gtd0 || (ls_iter > 1 && f_new >= f_prev) || !f_new.is_finite() {
            bracket = vec![(t_prev, f_prev, g_prev, gtd_prev), (t, f_new, g_new.clone(), gtd_new)];
            break;
        }
        if gtd_new.abs() <= -CURVATURE_C2 * gtd0 {
            bracket = vec![(t, f_new, g_new.clone(), gtd_new)];
            done = true;
            break;
        }
        if gtd_new >= 0.0 {
            bracket = vec![(t_prev, f_prev, g_prev, gtd_prev), (t, f_new, g_new.clone(), gtd_new)];
            break;
        }
        let min_step = t + 0.01 * (t - t_prev);
        let max_step = t * 10.0;
        let tmp = t;
        t = cubic_interpolate(t_prev, f_prev, gtd_prev, t, f_new, gtd_new, Some((min_step, max_step)));
        t_prev = tmp;
        f_prev = f_new;
        g_prev = g_new.clone();
        gtd_prev = gtd_new;
        f_new = eval(t, &mut g_new);
        evals += 1;
        gtd_new = dot(&g_new, d);
        ls_iter += 1;
    }

    // zoom
    let mut insuf_progress = false;
    let order = |b: &[(f64, f64, Vec<f64>, f64)]| -> (usize, usize) {
        if b[0].1 <= b[b.len() - 1].1 { (0, b.len() - 1) } else { (1, 0) }
    };
    let (mut low, mut high) = order(&bracket);
    while !done && ls_iter < MAX_LINE_SEARCH && bracket.len() == 2 {
        let (b0, b1) = (bracket[0].0, bracket[1].0);
        if (b1 - b0).abs() * d_norm < tol_change {
            break;
        }
        t = cubic_interpolate(b0, bracket[0].1, bracket[0].3, b1, bracket[1].1, bracket[1].3, None);
        let (bmin, bmax) = (b0.min(b1), b0.max(b1));
        let eps = 0.1 * (bmax - bmin);
        if (bmax - t).min(t - bmin) < eps {
            if insuf_progress || t >= bmax || t <= bmin {
                t = if (t - bmax).abs() < (t - bmin).abs() { bmax - eps } else { bmin + eps };
                insuf_progress = false;
            } else {
                insuf_progress = true;
            }
        } else {
            insuf_progress = false;
        }

        f_new = eval(t, &mut g_new);
        evals += 1;
        gtd_new = dot(&g_new, d);
        ls_iter += 1;

        if f_new > f0 + ARMIJO_C1 * t * gtd0 || f_new >= bracket[low].1 || !f_new.is_finite() {
            bracket[high] = (t, f_new, g_new.clone(), gtd_new);
            (low, high) = order(&bracket);
        } else {
            if gtd_new.abs() <= -CURVATURE_C2 * gtd0 {
                done = true;
            } else if gtd_new * (bracket[high].0 - bracket[low].0) >= 0.0 {
                bracket[high] = bracket[low].clone();
            }
            bracket[low] = (t, f_new, g_new.clone(), gtd_new);
        }
    }

    let (t, f, g, _) = bracket.swap_remove(low);
    LineSearchResult { t, f, g, evaluations: evals, satisfied: done }
}

/// Minimises `f` (which writes its gradient into the second argument and
/// returns its value) from `x0` with L-BFGS and strong-Wolfe line searches.
pub fn lbfgs_minimize<F>(mut f: F, x0: &[f64], cfg: &LbfgsConfig) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let max_eval = cfg.max_eval.unwrap_or(cfg.max_iter * 5 / 4).max(1);
    let history = cfg.history.max(1);

    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut loss = f(&x, &mut g);
    let mut evaluations = 1;

    let mut best_x = x.clone();
    let mut best_f = loss;
    let mut best_g_norm = inf_norm(&g);

    let result = |x: Vec<f64>, f: f64, gn: f64, it: usize, ev: usize, conv: bool, lsf: bool| LbfgsResult {
        x,
        f,
        grad_inf_norm: gn,
        iterations: it,
        evaluations: ev,
        converged: conv,
        line_search_failed: lsf,
    };

    if !loss.is_finite() {
        return result(x, loss, best_g_norm, 0, evaluations, false, false);
    }
    if inf_norm(&g) <= cfg.tol_grad {
        return result(x, loss, best_g_norm, 0, evaluations, true, false);
    }

    let mut old_dirs: Vec<Vec<f64>> = Vec::new();
    let mut old_steps: Vec<Vec<f64>> = Vec::new();
    let mut ro: Vec<f64> = Vec::new();
    let mut h_diag = 1.0;
    let mut d = vec![0.0; n];
    let mut t = 0.0;
    let mut prev_g = g.clone();
    let mut total_iter = 0;
    let mut converged = false;
    let mut ls_failed = false;

    'outer: for _ in 0..cfg.outer_loops.max(1) {
        let mut n_iter = 0;
        let mut current_evals = 0;
        while n_iter < cfg.max_iter {
            n_iter += 1;
            total_iter += 1;

            if total_iter == 1 {
                d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            } else {
                let y: Vec<f64> = g.iter().zip(&prev_g).map(|(a, b)| a - b).collect();
                let s: Vec<f64> = d.iter().map(|v| v * t).collect();
                let ys = dot(&y, &s);
                if ys > 1e-10 {
                    if old_dirs.len() == history {
                        old_dirs.remove(0);
                        old_steps.remove(0);
                        ro.remove(0);
                    }
                    h_diag = ys / dot(&y, &y);
                    old_dirs.push(y);
                    old_steps.push(s);
                    ro.push(1.0 / ys);
                }
                // two-loop recursion
                let k = old_dirs.len();
                let mut al = vec![0.0; k];
                let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
                for i in (0..k).rev() {
                    al[i] = dot(&old_steps[i], &q) * ro[i];
                    q.iter_mut().zip(&old_dirs[i]).for_each(|(qj, yj)| *qj -= al[i] * yj);
                }
                for (di, qi) in d.iter_mut().zip(&q) {
                    *di = qi * h_diag;
                }
                for i in 0..k {
                    let be = dot(&old_dirs[i], &d) * ro[i];
                    d.iter_mut().zip(&old_steps[i]).for_each(|(dj, sj)| *dj += sj * (al[i] - be));
                }
            }

            prev_g.copy_from_slice(&g);
            let prev_loss = loss;

            t = if total_iter == 1 {
                (1.0f64).min(1.0 / g.iter().map(|v| v.abs()).sum::<f64>()) * cfg.lr
            } else {
                cfg.lr
            };

            let gtd = dot(&g, &d);
            if gtd > -cfg.tol_change {
                converged = true;
                break 'outer;
            }

            let ls = strong_wolfe(&mut f, &x, t, &d, loss, &g, gtd, cfg.tol_change);
            ls_failed |= !ls.satisfied;
            t = ls.t;
            loss = ls.f;
            g = ls.g;
            for i in 0..n {
                x[i] += t * d[i];
            }
            current_evals += ls.evaluations;
            evaluations += ls.evaluations;

            let g_norm = inf_norm(&g);
            if loss < best_f {
                best_f = loss;
                best_x.copy_from_slice(&x);
                best_g_norm = g_norm;
            }
            if !loss.is_finite() {
                break 'outer;
            }
            if g_norm <= cfg.tol_grad {
                converged = true;
                break 'outer;
            }
            if n_iter == cfg.max_iter || current_evals >= max_eval {
                break;
            }
            if inf_norm(&d) * t.abs() <= cfg.tol_change || (loss - prev_loss).abs() < cfg.tol_change {
                converged = true;
                break 'outer;
            }
        }
    }

    result(best_x, best_f, best_g_norm, total_iter, evaluations, converged, ls_failed)
}
