//! Experiment orchestration for the `piezo-lab` binary: configuration
//! overrides, the canned check suite and report emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod commands;
pub mod error;
pub mod report;

pub use checks::{CheckResult, Suite, CHECK_NAMES};
pub use commands::{Options, Variant};
pub use error::{LabError, LabResult};
pub use report::ExperimentReport;
