//! Seeded Monte Carlo laboratory for the limit laws of graduation
//! (rounding) errors, Rajchman measures, oscillatory Wiener integrals and
//! Euler-scheme error processes.

pub mod error;
pub mod euler;
pub mod graduation;
pub mod measures;
pub mod paths;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use rng::SeedStream;
