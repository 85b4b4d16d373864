//! Composable lp-sensitivity sketches: create / solve / merge, plus the
//! regression and low-rank solvers built on the sampled embeddings.

pub mod dataset;
mod lra;
mod regression;
pub mod sensitivity;
#[allow(clippy::module_inception)]
mod sketch;

pub use dataset::{Dataset, DatasetError};
pub use lra::{lra_residual_sq, solve_lra, solve_lra_with, LraConfig, LraError, LraResult};
pub use regression::{lp_regression_cost, solve_regression, RegressionError, RegressionSolution};
pub use sketch::{
    create_sketch, create_sketch_with_taus, merge_sketches, solve_embedding, SenEntry, SenSample,
    Sketch, SketchError, SketchParams,
};
