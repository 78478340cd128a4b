//! Numerical laboratory for random band matrices.
//!
//! Samples symmetric band matrices whose entry variances follow a profile
//! `u(|i-j|/b)/b`, computes their spectra, and compares Monte Carlo
//! fluctuations of linear eigenvalue statistics `sum_j phi(lambda_j)` with the
//! closed-form limiting variance.

pub mod bandeig;
pub mod ensemble;
pub mod error;
pub mod montecarlo;
pub mod oracle;
pub mod quadrature;
pub mod record;
pub mod rng;
pub mod selfcheck;
pub mod statistics;
pub mod theory;

pub use error::{Error, Result};
