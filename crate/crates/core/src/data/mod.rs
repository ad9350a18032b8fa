//! Search spaces, observations, labelling and regret.

mod bbox;
mod dataset;
mod labels;
mod regret;
mod space;

pub use bbox::{bounding_box, BoundingBox, DEGENERATE_EXPANSION};
pub use dataset::{MetaDataset, Observation, TaskDataset};
pub use labels::{compute_threshold, label_and_weight, LabeledSet, WeightScaling};
pub use regret::{incumbent_trace, normalized_regret};
pub use space::{Dimension, SearchSpace};
