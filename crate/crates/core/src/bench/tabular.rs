use std::path::Path;

use serde::Deserialize;

use crate::data::{Dimension, SearchSpace};
use crate::{Error, Result};

/// A fully enumerated discrete benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularBenchmark {
    pub space: SearchSpace,
    /// Objective per grid point, indexed by [`TabularBenchmark::flat_index`].
    values: Vec<f64>,
    pub f_min: f64,
    pub f_max: f64,
}

#[derive(Deserialize)]
struct TableFile {
    space: SearchSpace,
    rows: Vec<(Vec<f64>, f64)>,
}

impl TabularBenchmark {
    /// Builds the table from `(raw point, value)` rows, which must cover
    /// every grid point of `space` exactly once.
    pub fn from_rows(space: SearchSpace, rows: &[(Vec<f64>, f64)]) -> Result<Self> {
        let size = space
            .grid_size()
            .ok_or_else(|| Error::InvalidSpace("tabular benchmarks need a fully discrete space".into()))?;
        let mut values = vec![None; size];
        for (line, (raw, y)) in rows.iter().enumerate() {
            let parse = |message: String| Error::Parse { line: line + 1, message };
            if !y.is_finite() {
                return Err(parse(format!("non-finite objective {y}")));
            }
            let levels = space.raw_level_indices(raw).map_err(|e| parse(e.to_string()))?;
            let k = flat(&space, &levels);
            if values[k].replace(*y).is_some() {
                return Err(parse(format!("duplicate grid point {raw:?}")));
            }
        }
        if let Some(k) = values.iter().position(Option::is_none) {
            return Err(Error::InvalidArgument(format!("grid point {k} of {size} is missing from the table")));
        }
        let values: Vec<f64> = values.into_iter().map(Option::unwrap).collect();
        let f_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let f_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(TabularBenchmark { space, values, f_min, f_max })
    }

    /// JSON `{"space": …, "rows": [[[raw…], y], …]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        Self::from_rows(file.space, &file.rows)
    }

    /// CSV with a header row; the last column is the objective and every
    /// other column becomes an ordinal dimension over its distinct values.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
        let width = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.len();
        if width < 2 {
            return Err(Error::Parse { line: 1, message: "need at least one parameter column and an objective column".into() });
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            if rec.len() != width {
                return Err(Error::Parse { line, message: format!("expected {width} fields, got {}", rec.len()) });
            }
            let nums = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse { line, message: format!("{f:?}: {e}") }))
                .collect::<Result<Vec<f64>>>()?;
            rows.push((nums[..width - 1].to_vec(), nums[width - 1]));
        }
        let dims = (0..width - 1)
            .map(|j| {
                let mut levels: Vec<f64> = rows.iter().map(|r| r.0[j]).collect();
                levels.sort_by(f64::total_cmp);
                levels.dedup();
                Dimension::Ordinal { levels }
            })
            .collect();
        Self::from_rows(SearchSpace::new(dims)?, &rows)
    }

    /// Loads `.csv` files as CSV and anything else as JSON.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::from_csv(&text)
        } else {
            Self::from_json(&text)
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row-major index of a grid point given per-dimension level indices.
    pub fn flat_index(&self, levels: &[usize]) -> usize {
        flat(&self.space, levels)
    }

    /// Value at the grid point nearest to an encoded point.
    pub fn lookup(&self, encoded: &[f64]) -> f64 {
        self.values[self.flat_index(&self.space.level_indices(encoded))]
    }

    /// Every grid point as an encoded point with its value, in flat-index order.
    pub fn entries(&self) -> Vec<(Vec<f64>, f64)> {
        let dims = self.space.dims();
        self.values
            .iter()
            .enumerate()
            .map(|(k, &y)| {
                let mut rest = k;
                let mut raw = vec![0.0; dims.len()];
                for (j, d) in dims.iter().enumerate().rev() {
                    let n = d.n_levels().expect("discrete");
                    raw[j] = d.level_value(rest % n);
                    rest /= n;
                }
                (self.space.encode(&raw).expect("grid points encode"), y)
            })
            .collect()
    }

    /// Value at a raw grid point.
    pub fn lookup_raw(&self, raw: &[f64]) -> Result<f64> {
        Ok(self.values[self.flat_index(&self.space.raw_level_indices(raw)?)])
    }
}

fn flat(space: &SearchSpace, levels: &[usize]) -> usize {
    space
        .dims()
        .iter()
        .zip(levels)
        .fold(0, |acc, (d, l)| acc * d.n_levels().expect("discrete") + l)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: &str = r#"{"space": {"dims": [{"kind": "integer", "lo": 0, "hi": 1}, {"kind": "ordinal", "levels": [8, 16]}]},
        "rows": [[[0, 8], 3.0], [[0, 16], 1.5], [[1, 8], -2.0], [[1, 16], 4.0]]}"#;

    #[test]
    fn json_lookup_returns_stored_values() {
        let t = TabularBenchmark::from_json(GRID).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.lookup(&[0.0, 1.0]), 1.5);
        assert_eq!(t.lookup(&[1.0, 0.0]), -2.0);
        assert_eq!(t.lookup_raw(&[1.0, 16.0]).unwrap(), 4.0);
        assert_eq!((t.f_min, t.f_max), (-2.0, 4.0));
        assert_eq!(t.lookup(&[1.0, 0.0]), t.f_min);
    }

    #[test]
    fn midpoints_snap_to_lower_level() {
        let t = TabularBenchmark::from_json(GRID).unwrap();
        assert_eq!(t.lookup(&[0.5, 0.5]), 3.0);
        assert_eq!(t.lookup(&[0.51, 0.49]), -2.0);
    }

    #[test]
    fn missing_and_duplicate_points_are_rejected() {
        let missing = GRID.replace(", [[1, 16], 4.0]", "");
        assert!(TabularBenchmark::from_json(&missing).is_err());
        let dup = GRID.replace("[[1, 16], 4.0]", "[[1, 8], 4.0]");
        assert!(matches!(TabularBenchmark::from_json(&dup), Err(Error::Parse { line: 4, .. })));
        let off_grid = GRID.replace("[[1, 16], 4.0]", "[[1, 12], 4.0]");
        assert!(TabularBenchmark::from_json(&off_grid).is_err());
    }

    #[test]
    fn entries_enumerate_the_grid() {
        let t = TabularBenchmark::from_json(GRID).unwrap();
        let e = t.entries();
        assert_eq!(e.len(), 4);
        for (x, y) in &e {
            assert_eq!(t.lookup(x), *y);
        }
        assert_eq!(e[1], (vec![0.0, 1.0], 1.5));
    }

    #[test]
    fn continuous_spaces_are_rejected() {
        let text = r#"{"space": {"dims": [{"kind": "continuous", "lo": 0, "hi": 1}]}, "rows": []}"#;
        assert!(matches!(TabularBenchmark::from_json(text), Err(Error::InvalidSpace(_))));
    }

    #[test]
    fn csv_builds_ordinal_grid() {
        let text = "width,lr,loss\n16,0.1,0.5\n16,0.01,0.25\n32,0.1,0.75\n32,0.01,1.0\n";
        let t = TabularBenchmark::from_csv(text).unwrap();
        assert_eq!(t.lookup_raw(&[32.0, 0.01]).unwrap(), 1.0);
        assert_eq!(t.lookup(&[0.0, 0.0]), 0.25);
        assert_eq!(t.f_min, 0.25);
        let bad = "width,loss\n16,0.5\n16,abc\n";
        assert!(matches!(TabularBenchmark::from_csv(bad), Err(Error::Parse { line: 3, .. })));
    }
}
