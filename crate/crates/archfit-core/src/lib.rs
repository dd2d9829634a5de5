//! Reconstruction of time-resolved tube-shaped surface meshes from sparse
//! planar contours.
//!
//! The crate couples a PCA statistical shape model ([`ssm`]) with a staged
//! gradient-based registration ([`fit`]) that aligns the model to a handful
//! of cross-sectional contours per time frame. Supporting modules provide
//! the fixed-topology mesh representation ([`mesh`]), plane slicing
//! ([`slice`]), voxelization ([`voxel`]), overlap and surface-distance
//! metrics ([`metrics`]), anatomical vessel features ([`vessel`]), the
//! slice-placement study ([`planner`]) and a parametric generator for
//! synthetic cohorts ([`synth`]).
//!
//! The crate is `no_std`-compatible (requires `alloc`); enable the `libm`
//! feature when building without `std`. All operations are pure and
//! deterministic: every stochastic step takes an explicit seed.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("archfit-core requires either the `std` or the `libm` feature");

pub mod error;
pub mod fit;
pub mod math;
pub mod mesh;
pub mod metrics;
pub mod planner;
pub mod slice;
pub mod spline;
pub mod ssm;
pub mod synth;
pub mod vessel;
pub mod voxel;

pub use error::Error;
pub use mesh::{CenterlineCurve, Plane, TubeMesh};
pub use ssm::ShapeModel;
pub use voxel::VoxelMask;

/// Crate-wide result type.
pub type Result<T> = core::result::Result<T, Error>;
