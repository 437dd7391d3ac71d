//! Scenario runner: parses a scenario file, executes pipeline stages and
//! writes provenance-stamped TSV and JSON outputs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod pipeline;
pub mod scenario;

pub use error::CliError;
pub use pipeline::{write_outputs, Output, Pipeline, Stage};
pub use scenario::Scenario;
