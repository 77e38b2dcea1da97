//! Linear eigenvalue statistics of random Hankel matrices.
//!
//! The crate has two independent routes to the same numbers:
//!
//! * [`ensemble`] draws random Hankel matrices `H = P T` and evaluates
//!   `w_p = Tr((H/√n)^p)`, both by dense linear algebra and by the closed-form
//!   trace formula over index vectors.
//! * [`partitions`], [`integrals`] and [`moments`] compute the limiting
//!   moments of `w_p` for odd `p` from pair partitions, their graphs and the
//!   associated indicator integrals.
//!
//! [`stats`] holds the estimators used to compare the two.

pub mod ensemble;
mod error;
pub mod estimate;
pub mod integrals;
pub mod moments;
pub mod parallel;
pub mod partitions;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use estimate::{EstimateMethod, MomentEstimate};
