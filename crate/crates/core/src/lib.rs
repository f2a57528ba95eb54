//! Metering-error estimation for DC fast-charging stations from the charging
//! records of the vehicles that use them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod estimator;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod quant;
pub mod report;
pub mod sim;

pub use config::ModelConfig;
pub use error::{Error, Result};
