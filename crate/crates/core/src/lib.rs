//! A numerical laboratory for a family of open problems: matrix and vector
//! discrepancy, Kuramoto synchronization landscapes, random ellipsoid fitting,
//! Kikuchi spectral methods for tensor PCA, multi-frequency spiked detection,
//! and Glauber dynamics on the SK model.
//!
//! Each module builds its objects exactly (integer arithmetic where possible),
//! checks them against brute-force oracles, and brackets conjectured thresholds
//! with seeded Monte Carlo sweeps. The [`lab`] module is the experiment
//! harness behind the `lab` binary.

pub mod discrepancy;
pub mod ellipsoid;
pub mod error;
pub mod kikuchi;
pub mod kuramoto;
pub mod lab;
pub mod lanczos;
pub mod linalg;
pub mod multifreq;
pub mod rng;
pub mod sk;
pub mod stats;
pub mod subsets;

pub use error::{LabError, Result};
pub use rng::{rng_stream, RngStream};
