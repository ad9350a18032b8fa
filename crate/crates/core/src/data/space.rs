use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One axis of a search space.
///
/// Raw points are plain `f64` slices: categorical values are given by their
/// index and ordinal values by the level itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dimension {
    Continuous { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
    Categorical { n_choices: usize },
    /// An ordered grid of arbitrary levels, encoded by its index.
    Ordinal { levels: Vec<f64> },
}

impl Dimension {
    fn validate(&self) -> Result<()> {
        match self {
            Dimension::Continuous { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidSpace(format!("continuous bounds [{lo}, {hi}]")));
                }
            }
            Dimension::Integer { lo, hi } => {
                if lo > hi {
                    return Err(Error::InvalidSpace(format!("integer bounds [{lo}, {hi}]")));
                }
            }
            Dimension::Categorical { n_choices } => {
                if *n_choices < 2 {
                    return Err(Error::InvalidSpace(format!("{n_choices} categories")));
                }
            }
            Dimension::Ordinal { levels } => {
                if levels.is_empty() || levels.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpace("ordinal levels must be finite and non-empty".into()));
                }
                if levels.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidSpace("ordinal levels must be strictly increasing".into()));
                }
            }
        }
        Ok(())
    }

    /// Width of this dimension in the encoded vector.
    pub fn encoded_width(&self) -> usize {
        match self {
            Dimension::Categorical { n_choices } => *n_choices,
            _ => 1,
        }
    }

    /// Number of grid levels, `None` for continuous dimensions.
    pub fn n_levels(&self) -> Option<usize> {
        match self {
            Dimension::Continuous { .. } => None,
            Dimension::Integer { lo, hi } => Some((hi - lo) as usize + 1),
            Dimension::Categorical { n_choices } => Some(*n_choices),
            Dimension::Ordinal { levels } => Some(levels.len()),
        }
    }

    fn level_index(&self, raw: f64) -> Option<usize> {
        match self {
            Dimension::Continuous { .. } => None,
            Dimension::Integer { lo, hi } => {
                let v = raw.round();
                if (raw - v).abs() > 1e-9 || v < *lo as f64 || v > *hi as f64 {
                    None
                } else {
                    Some((v as i64 - lo) as usize)
                }
            }
            Dimension::Categorical { n_choices } => {
                let v = raw.round();
                if (raw - v).abs() > 1e-9 || v < 0.0 || v >= *n_choices as f64 {
                    None
                } else {
                    Some(v as usize)
                }
            }
            Dimension::Ordinal { levels } => levels
                .iter()
                .position(|l| (l - raw).abs() <= 1e-9 * l.abs().max(1.0)),
        }
    }

    pub(crate) fn level_value(&self, index: usize) -> f64 {
        match self {
            Dimension::Continuous { .. } => unreachable!("continuous dimensions have no levels"),
            Dimension::Integer { lo, .. } => (*lo + index as i64) as f64,
            Dimension::Categorical { .. } => index as f64,
            Dimension::Ordinal { levels } => levels[index],
        }
    }
}

/// Index of the nearest grid level for an encoded scalar `u` on an
/// `n`-level grid; exact midpoints resolve to the lower index.
fn snap_index(u: f64, n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let scaled = u.clamp(0.0, 1.0) * (n - 1) as f64;
    ((scaled - 0.5).ceil().max(0.0) as usize).min(n - 1)
}

/// Argmax with the lowest index winning ties.
fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A typed search space whose points are encoded into `[0, 1]^D_enc`.
///
/// Continuous and grid dimensions map affinely onto `[0, 1]` (grids by level
/// index); categorical dimensions are one-hot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceDescriptor", into = "SpaceDescriptor")]
pub struct SearchSpace {
    dims: Vec<Dimension>,
    encoded_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct SpaceDescriptor {
    dims: Vec<Dimension>,
}

impl TryFrom<SpaceDescriptor> for SearchSpace {
    type Error = Error;

    fn try_from(d: SpaceDescriptor) -> Result<Self> {
        SearchSpace::new(d.dims)
    }
}

impl From<SearchSpace> for SpaceDescriptor {
    fn from(s: SearchSpace) -> Self {
        SpaceDescriptor { dims: s.dims }
    }
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSpace("no dimensions".into()));
        }
        for d in &dims {
            d.validate()?;
        }
        let encoded_dim = dims.iter().map(Dimension::encoded_width).sum();
        Ok(SearchSpace { dims, encoded_dim })
    }

    /// `[0, 1]^n` as continuous dimensions.
    pub fn unit(n: usize) -> Self {
        SearchSpace::new(vec![Dimension::Continuous { lo: 0.0, hi: 1.0 }; n]).expect("n > 0")
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    /// Number of raw coordinates.
    pub fn raw_dim(&self) -> usize {
        self.dims.len()
    }

    /// Length of encoded vectors.
    pub fn encoded_dim(&self) -> usize {
        self.encoded_dim
    }

    /// True if every dimension is a finite grid.
    pub fn is_discrete(&self) -> bool {
        self.dims.iter().all(|d| d.n_levels().is_some())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("space serialises")
    }

    pub fn encode(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.dims.len() {
            return Err(Error::Arity { expected: self.dims.len(), got: raw.len() });
        }
        let mut out = Vec::with_capacity(self.encoded_dim);
        for (i, (d, &v)) in self.dims.iter().zip(raw).enumerate() {
            let oob = || Error::OutOfBounds { dim: i, value: v };
            match d {
                Dimension::Continuous { lo, hi } => {
                    if !(v >= *lo && v <= *hi) {
                        return Err(oob());
                    }
                    out.push((v - lo) / (hi - lo));
                }
                Dimension::Categorical { n_choices } => {
                    let k = d.level_index(v).ok_or_else(oob)?;
                    out.extend((0..*n_choices).map(|j| if j == k { 1.0 } else { 0.0 }));
                }
                _ => {
                    let k = d.level_index(v).ok_or_else(oob)?;
                    let n = d.n_levels().unwrap();
                    out.push(if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 });
                }
            }
        }
        Ok(out)
    }

    /// Maps an encoded point back to raw values, snapping grid and categorical
    /// coordinates to their nearest level.
    pub fn decode(&self, encoded: &[f64]) -> Result<Vec<f64>> {
        if encoded.len() != self.encoded_dim {
            return Err(Error::Arity { expected: self.encoded_dim, got: encoded.len() });
        }
        let mut out = Vec::with_capacity(self.dims.len());
        let mut offset = 0;
        for d in &self.dims {
            match d {
                Dimension::Continuous { lo, hi } => {
                    out.push(lo + encoded[offset].clamp(0.0, 1.0) * (hi - lo));
                }
                Dimension::Categorical { n_choices } => {
                    out.push(argmax_first(&encoded[offset..offset + n_choices]) as f64);
                }
                _ => {
                    let k = snap_index(encoded[offset], d.n_levels().unwrap());
                    out.push(d.level_value(k));
                }
            }
            offset += d.encoded_width();
        }
        Ok(out)
    }

    /// Snaps an encoded point in place onto the grid of every discrete
    /// dimension. Continuous coordinates are clamped to `[0, 1]`.
    pub fn snap(&self, encoded: &mut [f64]) {
        debug_assert_eq!(encoded.len(), self.encoded_dim);
        let mut offset = 0;
        for d in &self.dims {
            match d {
                Dimension::Continuous { .. } => {
                    encoded[offset] = encoded[offset].clamp(0.0, 1.0);
                }
                Dimension::Categorical { n_choices } => {
                    let seg = &mut encoded[offset..offset + n_choices];
                    let k = argmax_first(seg);
                    for (j, v) in seg.iter_mut().enumerate() {
                        *v = if j == k { 1.0 } else { 0.0 };
                    }
                }
                _ => {
                    let n = d.n_levels().unwrap();
                    let k = snap_index(encoded[offset], n);
                    encoded[offset] = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
                }
            }
            offset += d.encoded_width();
        }
    }

    /// A uniformly random encoded point (uniform over categories and grid
    /// levels, up to the half-width end cells of grid dimensions).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.encoded_dim).map(|_| rng.random::<f64>()).collect();
        self.snap(&mut x);
        x
    }

    /// Per-dimension level index of a snapped encoded point (0 for continuous).
    pub(crate) fn level_indices(&self, encoded: &[f64]) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dims.len());
        let mut offset = 0;
        for d in &self.dims {
            match d {
                Dimension::Continuous { .. } => out.push(0),
                Dimension::Categorical { n_choices } => {
                    out.push(argmax_first(&encoded[offset..offset + n_choices]))
                }
                _ => out.push(snap_index(encoded[offset], d.n_levels().unwrap())),
            }
            offset += d.encoded_width();
        }
        out
    }

    /// Per-dimension level indices of a raw point of a discrete space.
    pub(crate) fn raw_level_indices(&self, raw: &[f64]) -> Result<Vec<usize>> {
        if raw.len() != self.dims.len() {
            return Err(Error::Arity { expected: self.dims.len(), got: raw.len() });
        }
        self.dims
            .iter()
            .enumerate()
            .map(|(dim, d)| d.level_index(raw[dim]).ok_or(Error::OutOfBounds { dim, value: raw[dim] }))
            .collect()
    }

    /// Total number of grid points of a discrete space.
    pub fn grid_size(&self) -> Option<usize> {
        self.dims
            .iter()
            .map(Dimension::n_levels)
            .try_fold(1usize, |acc, n| n.and_then(|n| acc.checked_mul(n)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn continuous_midpoint() {
        let s = SearchSpace::new(vec![Dimension::Continuous { lo: 0.0, hi: 10.0 }]).unwrap();
        assert_eq!(s.encode(&[5.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn categorical_one_hot() {
        let s = SearchSpace::new(vec![Dimension::Categorical { n_choices: 3 }]).unwrap();
        assert_eq!(s.encode(&[1.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(s.decode(&[0.0, 1.0, 0.0]).unwrap(), vec![1.0]);
        assert_eq!(s.encoded_dim(), 3);
    }

    #[test]
    fn power_of_two_grid_scales_by_index() {
        // Width grid {16, ..., 512}: six levels, encoded as index / 5.
        let widths: Vec<f64> = (4..=9).map(|p| f64::from(1u32 << p)).collect();
        let s = SearchSpace::new(vec![Dimension::Ordinal { levels: widths.clone() }]).unwrap();
        for (i, w) in widths.iter().enumerate() {
            let e = s.encode(&[*w]).unwrap();
            assert!((e[0] - i as f64 / 5.0).abs() < 1e-15);
            assert_eq!(s.decode(&e).unwrap(), vec![*w]);
        }
        assert!((s.encode(&[32.0]).unwrap()[0] - 0.2).abs() < 1e-15);
        // The six-level grid starting at 8 puts 16 at index 1.
        let s8 = SearchSpace::new(vec![Dimension::Ordinal {
            levels: (3..=8).map(|p| f64::from(1u32 << p)).collect(),
        }])
        .unwrap();
        assert!((s8.encode(&[16.0]).unwrap()[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn encode_errors() {
        let s = SearchSpace::new(vec![
            Dimension::Continuous { lo: 0.0, hi: 1.0 },
            Dimension::Integer { lo: 1, hi: 3 },
        ])
        .unwrap();
        assert!(matches!(s.encode(&[0.5]), Err(Error::Arity { .. })));
        assert!(matches!(s.encode(&[1.5, 2.0]), Err(Error::OutOfBounds { dim: 0, .. })));
        assert!(matches!(s.encode(&[0.5, 2.5]), Err(Error::OutOfBounds { dim: 1, .. })));
        assert!(matches!(s.encode(&[0.5, 4.0]), Err(Error::OutOfBounds { dim: 1, .. })));
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(SearchSpace::new(vec![Dimension::Continuous { lo: 1.0, hi: 1.0 }]).is_err());
        assert!(SearchSpace::new(vec![Dimension::Integer { lo: 2, hi: 1 }]).is_err());
        assert!(SearchSpace::new(vec![Dimension::Categorical { n_choices: 1 }]).is_err());
        assert!(SearchSpace::new(vec![]).is_err());
        assert!(SearchSpace::new(vec![Dimension::Integer { lo: 2, hi: 2 }]).is_ok());
    }

    #[test]
    fn snapping_ties_go_to_lower_index() {
        let s = SearchSpace::new(vec![Dimension::Integer { lo: 0, hi: 2 }]).unwrap();
        let mut x = vec![0.25];
        s.snap(&mut x);
        assert_eq!(x, vec![0.0]);
        let mut x = vec![0.26];
        s.snap(&mut x);
        assert_eq!(x, vec![0.5]);
        let c = SearchSpace::new(vec![Dimension::Categorical { n_choices: 3 }]).unwrap();
        let mut x = vec![0.4, 0.7, 0.7];
        c.snap(&mut x);
        assert_eq!(x, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn descriptor_json_round_trip() {
        let text = r#"{"dims":[{"kind":"continuous","lo":-5.0,"hi":10.0},{"kind":"integer","lo":1,"hi":4},{"kind":"categorical","n_choices":3}]}"#;
        let s = SearchSpace::from_json(text).unwrap();
        assert_eq!(s.encoded_dim(), 5);
        assert_eq!(SearchSpace::from_json(&s.to_json()).unwrap(), s);
        assert!(SearchSpace::from_json(r#"{"dims":[{"kind":"categorical","n_choices":1}]}"#).is_err());
    }

    fn mixed_space() -> SearchSpace {
        SearchSpace::new(vec![
            Dimension::Continuous { lo: -3.0, hi: 7.5 },
            Dimension::Integer { lo: -2, hi: 9 },
            Dimension::Categorical { n_choices: 4 },
            Dimension::Ordinal { levels: vec![1e-4, 1e-3, 5e-3, 0.1] },
        ])
        .unwrap()
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(c in -3.0f64..7.5, i in -2i64..=9, k in 0usize..4, o in 0usize..4) {
            let s = mixed_space();
            let levels = [1e-4, 1e-3, 5e-3, 0.1];
            let raw = vec![c, i as f64, k as f64, levels[o]];
            let enc = s.encode(&raw).unwrap();
            prop_assert!(enc.iter().all(|v| (0.0..=1.0).contains(v)));
            let back = s.decode(&enc).unwrap();
            prop_assert!((back[0] - c).abs() <= 1e-12);
            prop_assert_eq!(&back[1..], &raw[1..]);
        }

        #[test]
        fn snap_is_idempotent(seed in any::<u64>()) {
            use rand::SeedableRng;
            let s = mixed_space();
            let mut rng = crate::rng::Rng::seed_from_u64(seed);
            let x = s.sample_uniform(&mut rng);
            let mut y = x.clone();
            s.snap(&mut y);
            prop_assert_eq!(x, y);
        }
    }
}
