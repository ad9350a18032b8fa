//! Parameter storage, gradient checking and the two optimisers used by the
//! models: ADAM for meta-training and L-BFGS for embedding adaptation.

mod adam;
mod gradcheck;
mod lbfgs;
mod params;

pub use adam::{adam_run, Adam, AdamConfig, AdamReport, EarlyStopping, Minibatches};
pub use gradcheck::{central_differences, grad, max_relative_error, Differentiable};
pub use lbfgs::{lbfgs_minimize, strong_wolfe, LbfgsConfig, LbfgsResult, LineSearchResult, ARMIJO_C1, CURVATURE_C2};
pub use params::{ParamVector, Segment};
