//! Torus-phase realization of the probability space and its flow.

mod birkhoff;
mod ensemble;

pub use birkhoff::{birkhoff_compare, ergodicity_residual, ergodicity_residual_sampled, BirkhoffReport};
pub use ensemble::{torus_grid_mean, Phase, QuasiPeriodicEnsemble, Realization, DEFAULT_M_MAX};
