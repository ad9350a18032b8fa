use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SearchSpace;
use crate::{Error, Result};

/// An encoded point and its (minimised) objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Observation { x, y }
    }
}

/// All observations collected on one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub task_id: u64,
    pub obs: Vec<Observation>,
}

impl TaskDataset {
    pub fn new(task_id: u64, obs: Vec<Observation>) -> Self {
        TaskDataset { task_id, obs }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.obs.iter().map(|o| o.y).collect()
    }

    /// Only the observations with a finite objective value.
    pub fn finite(&self) -> TaskDataset {
        TaskDataset {
            task_id: self.task_id,
            obs: self.obs.iter().filter(|o| o.y.is_finite()).cloned().collect(),
        }
    }
}

/// Evaluations from a set of related tasks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetaDataset {
    pub tasks: Vec<TaskDataset>,
}

#[derive(Serialize, Deserialize)]
struct TaskRecord {
    task_id: u64,
    obs: Vec<(Vec<f64>, f64)>,
}

impl MetaDataset {
    pub fn new(tasks: Vec<TaskDataset>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &tasks {
            if !seen.insert(t.task_id) {
                return Err(Error::InvalidArgument(format!("duplicate task id {}", t.task_id)));
            }
        }
        Ok(MetaDataset { tasks })
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_observations(&self) -> usize {
        self.tasks.iter().map(TaskDataset::len).sum()
    }

    pub fn encoded_dim(&self) -> Option<usize> {
        self.tasks.iter().flat_map(|t| t.obs.first()).map(|o| o.x.len()).next()
    }

    /// Parses the JSON-lines format, one `{"task_id": .., "obs": [[[x..], y], ..]}`
    /// record per line with raw coordinates, encoding them through `space`.
    pub fn read_jsonl<R: BufRead>(reader: R, space: &SearchSpace) -> Result<Self> {
        let mut tasks = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TaskRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
            let mut obs = Vec::with_capacity(rec.obs.len());
            for (raw, y) in rec.obs {
                let x = space
                    .encode(&raw)
                    .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
                obs.push(Observation { x, y });
            }
            tasks.push(TaskDataset { task_id: rec.task_id, obs });
        }
        MetaDataset::new(tasks)
    }

    pub fn load_jsonl(path: impl AsRef<Path>, space: &SearchSpace) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file), space)
    }

    /// Writes raw (decoded) coordinates in the JSON-lines format.
    pub fn write_jsonl<W: Write>(&self, mut writer: W, space: &SearchSpace) -> Result<()> {
        for t in &self.tasks {
            let obs = t
                .obs
                .iter()
                .map(|o| Ok((space.decode(&o.x)?, o.y)))
                .collect::<Result<Vec<_>>>()?;
            let rec = TaskRecord { task_id: t.task_id, obs };
            serde_json::to_writer(&mut writer, &rec)?;
            writer.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
        }
        Ok(())
    }
}
