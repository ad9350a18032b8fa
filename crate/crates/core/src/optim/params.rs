use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A named slice of a [`ParamVector`], stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// A flat parameter array partitioned into named segments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector {
    values: Vec<f64>,
    segments: Vec<Segment>,
}

impl ParamVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a `rows × cols` segment filled by `init(index)`.
    pub fn push_segment(&mut self, name: &str, rows: usize, cols: usize, mut init: impl FnMut(usize) -> f64) {
        assert!(self.segment(name).is_none(), "duplicate segment {name}");
        let offset = self.values.len();
        self.values.extend((0..rows * cols).map(&mut init));
        self.segments.push(Segment { name: name.to_string(), offset, rows, cols });
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    pub fn get(&self, name: &str) -> &[f64] {
        let s = self.segment(name).unwrap_or_else(|| panic!("no segment {name}"));
        &self.values[s.range()]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut [f64] {
        let r = self.segment(name).unwrap_or_else(|| panic!("no segment {name}")).range();
        &mut self.values[r]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// A zero vector with the same layout.
    pub fn zeros_like(&self) -> ParamVector {
        ParamVector { values: vec![0.0; self.values.len()], segments: self.segments.clone() }
    }

    /// Segment name → values, for serialisation.
    pub fn to_map(&self) -> BTreeMap<String, Vec<f64>> {
        self.segments.iter().map(|s| (s.name.clone(), self.values[s.range()].to_vec())).collect()
    }

    /// Overwrites every segment from `map`, which must match this layout.
    pub fn fill_from_map(&mut self, map: &BTreeMap<String, Vec<f64>>) -> Result<()> {
        if map.len() != self.segments.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameter segments, found {}",
                self.segments.len(),
                map.len()
            )));
        }
        for s in &self.segments {
            let v = map
                .get(&s.name)
                .ok_or_else(|| Error::InvalidArgument(format!("missing segment {}", s.name)))?;
            if v.len() != s.len() {
                return Err(Error::InvalidArgument(format!(
                    "segment {} has {} values, expected {}",
                    s.name,
                    v.len(),
                    s.len()
                )));
            }
            self.values[s.range()].copy_from_slice(v);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_partition_the_array() {
        let mut p = ParamVector::new();
        p.push_segment("w", 2, 3, |i| i as f64);
        p.push_segment("b", 1, 3, |_| 0.5);
        assert_eq!(p.len(), 9);
        let covered: usize = p.segments().iter().map(Segment::len).sum();
        assert_eq!(covered, p.len());
        assert_eq!(p.get("w"), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(p.get("b"), &[0.5; 3]);
        let map = p.to_map();
        let mut q = p.zeros_like();
        q.fill_from_map(&map).unwrap();
        assert_eq!(p, q);
        let mut bad = map.clone();
        bad.get_mut("b").unwrap().pop();
        assert!(q.fill_from_map(&bad).is_err());
    }
}
