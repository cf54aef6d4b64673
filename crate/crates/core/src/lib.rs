//! Simulation and estimation toolkit for contemporaneous aggregation of
//! random-coefficient AR(1) processes and nearest-neighbour autoregressive
//! random fields.
//!
//! The crate is split along the pipeline:
//!
//! * [`innovations`] — innovation samplers (Gaussian, alpha-stable, Pareto-tail
//!   laws in a stable domain of attraction, infinitely divisible triangular
//!   arrays) and the stable characteristic function.
//! * [`mixing`] — mixing densities for the random autoregressive coefficient:
//!   densities, unit-root tail parameters, exact moments, and samplers.
//! * [`ar1sim`] — panel simulation of independent AR(1) paths with a random
//!   coefficient, aggregation schemes, and joint partial sums.
//! * [`analytics`] — exact second-order theory for the aggregated process:
//!   covariances and spectral densities by quadrature, asymptotic constants,
//!   memory-regime classification, partial-sum variance slopes, and the
//!   covariance / characteristic function of the limit processes.
//! * [`disaggregation`] — recovery of the mixing density from panel or
//!   aggregate data: moment estimators, a parametric likelihood estimator, and
//!   an orthogonal-series density estimator with a Gegenbauer-weight basis.
//! * [`fields`] — nearest-neighbour autoregressive random fields on the
//!   lattice: random-walk Green tables, field panel simulation, spectral
//!   densities, and anisotropic scaling exponents.
//! * [`rng`], [`numeric`], [`io`] — deterministic stream derivation,
//!   quadrature/optimization/summation utilities, and on-disk formats.

pub mod analytics;
pub mod ar1sim;
pub mod disaggregation;
pub mod error;
pub mod fields;
pub mod innovations;
pub mod io;
pub mod mixing;
pub mod numeric;
pub mod rng;

pub use error::{Error, Result};

/// Library version, for run manifests and sidecar provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
