//! Random perforated domains: marked Poisson sampling, cluster boxes with
//! separation guarantees, Monte Carlo checks of occupancy and separation
//! events, John paths in carved boxes, a discrete inverse-divergence operator
//! with restriction to the perforated domain, and hole cut-off rates.

pub mod geometry;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod stochastic;
pub mod clusterer;
pub mod john;
pub mod grid;
pub mod solver;
pub mod bogovskii;
pub mod cutoff;
