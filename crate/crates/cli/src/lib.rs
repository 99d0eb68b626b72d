//! Command-line front end for `ebl-core`: JSON problem files, solver reports,
//! the benchmark harness and the brute-force grid oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod app;
pub mod bench;
pub mod error;
pub mod files;
pub mod oracle;
pub mod solve;

pub use app::run;
pub use error::{exit, CliError};
