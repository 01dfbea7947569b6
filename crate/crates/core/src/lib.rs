//! Voxel-resolution cortical graphs and spectral analysis of signals on them.
//!
//! The crate is organised along the processing chain:
//!
//! * [`volume`] reads NIfTI masks and functional volumes, resamples and cleans
//!   masks, and samples scalar volumes at world coordinates.
//! * [`surface`] loads triangle meshes and answers segment/surface crossing
//!   queries through a uniform-grid index.
//! * [`graph`] turns a mask into a 26-neighbourhood voxel graph, prunes edges
//!   that cross the surface and exposes the normalized Laplacian.
//! * [`spectral`] computes eigenpairs (dense, or the lower end of the
//!   spectrum with a Chebyshev-filtered block subspace iteration).
//! * [`frame`] designs the warped tight frame of spectral kernels and applies
//!   their Chebyshev approximations to graph signals.
//! * [`energy`] computes ensemble spectral-energy profiles and correlation
//!   statistics.
//! * [`experiment`] builds HRF regressors, selects frames, assembles signal
//!   sets and generates synthetic phantoms.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod experiment;
pub mod frame;
pub mod graph;
mod binio;
pub mod spectral;
pub mod surface;
pub mod volume;

pub use error::{Error, ErrorKind, Result};

/// Library version, embedded in every binary container written by this crate.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
