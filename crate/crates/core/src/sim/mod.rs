//! Finite-dimensional simulation: sampling, trainers and empirical metrics.

pub mod dataset;
pub mod empirical;
pub mod gamp;
pub mod io;
pub mod linalg;
pub mod objective;
pub mod optim;
pub mod train;

pub use dataset::{sample_dataset, Dataset, Spectra};
pub use empirical::{empirical_errors, empirical_overlaps, EmpiricalErrors, EmpiricalOverlaps, TestSampling};
pub use gamp::{advgamp_train, GampConfig};
pub use objective::{MarginObjective, Penalty};
pub use train::{erm_train, fgm_train, surrogate_train, Estimator, Method, TrainerConfig};
