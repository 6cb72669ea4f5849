//! Geometric Brownian motion on the special linear group: isotropic noise,
//! path integrators, exact moment dynamics, Monte Carlo estimators and a
//! backward-equation solver for a smoothed tail observable.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod linalg;
pub mod moments;
pub mod noise;
pub mod parallel;
pub mod pde;
pub mod rng;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{GramSummary, SquareMatrix};
pub use moments::{exact_moments, generator_matrix, partitions, MomentTable, Partition};
pub use noise::{noise_coefficients, sample_increment, CovariationKind, NoiseIncrement};
pub use parallel::Workers;
pub use rng::RngStream;
pub use sde::{run_trajectory, Scheme, TrajectoryConfig, TrajectoryRecord};
pub use stats::EstimatorSummary;
