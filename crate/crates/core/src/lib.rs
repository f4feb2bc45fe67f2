//! Sparse source localization on graphs.
//!
//! Given a single snapshot `b` of a heat-diffusion process on a weighted
//! graph, recover the sparse initial signal `x` (the sources) and the
//! diffusion time `theta` by minimizing
//! `gamma ||x||_1 + alpha/2 ||M (exp(-theta L) x - b)||^2`
//! where `L` is the normalized Laplacian and `M` an observation mask.
//!
//! * [`graph`]: k-NN graph construction, normalized Laplacian, spectra, hops
//! * [`diffusion`]: heat kernel and its `theta` derivatives
//! * [`solver`]: FISTA x-step, smoothed Newton theta-step, alternating loop
//! * [`metrics`]: influence-zone hop error
//! * [`data_io`]: CSV datasets, interpolation, outliers, result tables
//! * [`experiments`]: synthetic generators and the reproducible grids

pub mod data_io;
pub mod diffusion;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod metrics;
pub mod solver;

pub use error::{Error, Result};
