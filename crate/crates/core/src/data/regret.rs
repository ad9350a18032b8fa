use crate::{Error, Result};

/// Running minimum of `ys`; non-finite values count as `+∞`.
pub fn incumbent_trace(ys: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    ys.iter()
        .map(|&y| {
            if y.is_finite() && y < best {
                best = y;
            }
            best
        })
        .collect()
}

/// `(min_{i≤N} y_i − f_min) / (f_max − f_min)` for every prefix of `ys`.
pub fn normalized_regret(ys: &[f64], f_min: f64, f_max: f64) -> Result<Vec<f64>> {
    if !(f_min < f_max) {
        return Err(Error::InvalidArgument(format!("f_min = {f_min} must be below f_max = {f_max}")));
    }
    let range = f_max - f_min;
    Ok(incumbent_trace(ys).into_iter().map(|b| (b - f_min) / range).collect())
}
