//! Adaptive lack-of-fit testing for parametric single-index regression.
//!
//! The crate fits models of the form `y = g(b'x, theta) + e` by nonlinear
//! least squares and tests their adequacy against nonparametric departures
//! whose index space may have more than one direction. The test statistic is
//! a Cramer-von Mises functional of a residual-marked empirical process in
//! estimated projections, made asymptotically distribution free by an
//! empirical martingale transform. Dimension adaptivity comes from a
//! cumulative slicing estimate of the index space whose dimension is picked
//! by a penalized eigenvalue ratio, so the statistic behaves like a
//! one-dimensional projection test under the null while retaining power in
//! every direction of the estimated space under alternatives.
//!
//! Module map:
//! - [`model`]: model families, analytic derivatives, datasets.
//! - [`nls`]: damped Gauss-Newton least-squares fitting.
//! - [`sdr`]: standardization, cumulative slicing, dimension selection.
//! - [`kernel`]: Nadaraya-Watson plug-ins for the transform.
//! - [`process`]: marked empirical process, martingale transform,
//!   direction grids and the sup-process.
//! - [`gof`]: the adaptive test statistic, its limiting-distribution
//!   quantiles and the end-to-end testing pipeline.
//! - [`baselines`]: reference tests (single-projection transform test,
//!   local smoothing tests, integrated conditional moment test).
//! - [`sim`]: scenario generators and the replicated size/power harness.
//!
//! Replication loops run in parallel through rayon when the default
//! `parallel` feature is on; results are bit-identical for any worker count
//! because every replication seeds its own generator from its index.

pub mod baselines;
pub mod error;
pub mod gof;
pub mod kernel;
pub mod model;
pub mod nls;
pub mod process;
pub mod sdr;
pub mod sim;

mod exec;
mod linalg;

pub use error::{Error, Result};
