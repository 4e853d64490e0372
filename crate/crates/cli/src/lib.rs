//! Batch front end for the `finsler` crate.
//!
//! A run reads a TOML config, builds the metric through a
//! [`MetricRegistry`], executes the requested analyses in a fixed order and
//! emits a JSON [`Report`] plus an optional CSV of sampled tensors.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod registry;
pub mod report;
pub mod run;

pub use config::{Analysis, Assertion, RunConfig};
pub use error::ConfigError;
pub use registry::{FamilyInfo, MetricRegistry};
pub use report::Report;
pub use run::{
    execute, resolve, run, Command, Outcome, Overrides, EXIT_ASSERTION, EXIT_ERROR, EXIT_OK,
};
