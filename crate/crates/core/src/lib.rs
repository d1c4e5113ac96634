//! Tree loss: a cover-tree reparameterization of the multi-class
//! cross-entropy weight matrix.
//!
//! Class weight vectors are written as sums of parameter rows along
//! leaf-to-root paths of a label tree, so classes that are close under a
//! label metric share most of their parameters. The crate is organized as:
//!
//! - [`metric_space`]: label metrics (embedding-derived, epsilon-mixed),
//!   axiom checks and doubling-constant estimation.
//! - [`cover_tree`]: cover tree construction over labels and the U/V path
//!   tables derived from it.
//! - [`tree_loss`]: flat, U and V parameterizations with exact losses,
//!   analytic gradients and scoring.
//! - [`optimizer`]: single-sample averaged SGD.
//! - [`synthetic`]: Gaussian class-center data generator.
//! - [`harness`]: experiment runners and norm-bound checks behind the CLI.

pub mod cover_tree;
pub mod error;
pub mod harness;
pub mod metric_space;
pub mod optimizer;
pub mod synthetic;
pub mod tree_loss;

pub use cover_tree::{CoverTree, PathTable, TreeVariant};
pub use error::{Error, Result};
pub use metric_space::LabelMetric;
pub use optimizer::{sgd_train, SgdConfig, StepSize, TrainResult};
pub use tree_loss::{Dataset, ParamMatrix};
