//! Numerical utilities shared across the crate: compensated summation,
//! quadrature with endpoint-singularity support, a few special functions not
//! provided by `statrs`, and a small quasi-Newton minimizer.

pub mod kahan;
pub mod optim;
pub mod quad;
pub mod special;

pub use kahan::Kahan;
