//! Forward modeling and reconstruction for the single-pixel X-ray transform.
//!
//! The transform maps a non-negative absorption density supported in the unit
//! ball to a single scalar per source position: the mean transmitted intensity
//! fraction over a cone of rays collected by one detector pixel. For
//! rotationally symmetric objects the unknown reduces to a 1D radial profile,
//! which this crate reconstructs from noisy measurements by Douglas-Rachford
//! splitting with total-variation regularization.
//!
//! Modules follow the pipeline:
//!
//! * [`phantom`] — analytic shell objects, voxelization, radial-class reduction
//! * [`geometry`] — source lattices on a sphere and detector ray bundles
//! * [`forward`] — exact ray path lengths, the discrete transform, its gradient,
//!   and synthetic measurement generation
//! * [`tvprox`] — exact 1D total-variation proximal operator
//! * [`solver`] — Douglas-Rachford driver with a box-constrained quasi-Newton
//!   inner solver for the data term
//! * [`metrics`] — SSIM/RMSE evaluation and tolerance-based measurement
//!   comparison
//!
//! The crate is `no_std` (with `alloc`); all float math goes through `libm`
//! so results are identical across build configurations.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod forward;
pub mod geometry;
mod math;
pub mod metrics;
pub mod phantom;
pub mod solver;
pub mod tvprox;
pub mod vec3;
