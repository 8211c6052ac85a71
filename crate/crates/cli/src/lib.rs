//! Library side of the `adv-se` binary, exposed so the acceptance suite can
//! drive experiments without spawning processes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, Format, Mode, UsageError};
pub use output::ResultRow;
pub use run::run;
