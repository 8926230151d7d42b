//! Score-based point cloud denoising.
//!
//! A noisy point cloud is modelled as samples of the clean surface
//! distribution convolved with a noise density. Its mode is the clean
//! surface, so denoising amounts to moving every point uphill along the
//! score (the gradient of the log-density). This crate provides:
//!
//! - point containers, a k-d tree, farthest point sampling and patching
//!   ([`geometry`], [`spatial`], [`patch`]),
//! - triangle meshes, surface sampling and point-to-mesh distances ([`mesh`]),
//! - noise synthesis ([`noise`]),
//! - the score network with hand-written reverse mode ([`network`]),
//! - the score-matching objective and optimizer loop ([`training`]),
//! - ensemble-score gradient ascent over whole clouds ([`denoise`]),
//! - closed-form and empirical score oracles ([`oracle`]),
//! - Chamfer and point-to-mesh metrics ([`metrics`]).
//!
//! The crate is `no_std` and only needs an allocator. File formats and the
//! command-line front end live in the `scoredenoise` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod denoise;
mod error;
pub mod geometry;
pub mod mesh;
pub mod metrics;
pub mod network;
pub mod noise;
pub mod oracle;
pub mod patch;
pub mod rng;
pub mod spatial;
pub mod training;

pub use error::{Error, Result};
pub use geometry::{normalize_unit_sphere, NormalizationTransform, Point3, PointCloud};
