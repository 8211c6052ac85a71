//! Exact high-dimensional asymptotics of adversarially trained linear
//! classifiers on the Block Feature Model, with finite-size simulators to
//! check them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bfm;
pub mod channel;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod params;
pub mod quad;
pub mod se;
pub mod sim;
pub mod special;

pub use bfm::{build_bfm, Block, BlockFeatureModel, ModelSpec, PowerLaw, SpectralAtom};
pub use error::{Error, Result};
pub use params::ExperimentParams;
pub use se::{AuxOverlaps, ConjugateOverlaps, FixedPoint, Overlaps, SolverConfig};
