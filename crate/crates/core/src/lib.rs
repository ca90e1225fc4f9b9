//! Self-paced multi-label learning with diversity (SPMLD) on top of a
//! low-rank label factorization host with learned global and local label
//! correlation Laplacians.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`]: datasets, file formats, missing-label masking, splits and a
//!   synthetic generator with controllable instance hardness.
//! - [`partition`]: k-means grouping of instances for the local terms.
//! - [`model`]: learned state, the objective, predictions, initialization and
//!   checkpoints.
//! - [`selfpaced`]: the closed-form pace-weight solver and its annealing.
//! - [`optim`]: block gradients, line search and the block coordinate descent
//!   driver.
//! - [`metrics`]: ranking and F1 metrics, aggregation and paired t-tests.

pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod partition;
pub mod selfpaced;

pub use error::{Error, Result};

/// Column-major dense matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
