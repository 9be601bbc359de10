//! Grid-free geometric modeling with spherical decompositions.
//!
//! A solid is approximated by a union of balls, encoded as a weighted set of
//! "knots" (ball centers, possibly with per-knot radii). The union is the
//! 0-sublevel set of a sum of compactly supported radial kernels, which makes
//! Minkowski sums, configuration-space obstacles, collision predicates and
//! shape-complementarity scores available both as exact combinatorial
//! operations on the knots and as spectral correlations through uniform and
//! nonequispaced discrete Fourier transforms.
//!
//! Module map:
//! - [`solids`]: triangle-mesh solids, uniform grids, scalar fields,
//!   Hausdorff estimation
//! - [`kernels`]: the mollifier, ball/cone bumps, knot sets, rasterization
//! - [`decomposition`]: greedy distance/SDF-guided ball sampling
//! - [`motions`]: SE(3) elements and their action on knots
//! - [`correlation`]: obstacle knot algebra and the combinatorial oracle
//! - [`spectral`]: DFT/NDFT, kernel spectra, Fourier gap assembly
//! - [`applications`]: collision predicates and complementarity scoring

pub mod applications;
pub mod correlation;
pub mod decomposition;
pub mod error;
pub mod kernels;
pub mod motions;
pub mod solids;
pub mod spectral;

pub use error::{Error, Result};
pub use kernels::{BallSet, KnotSet3, KnotSet4, MollifierParams, OccupancyBitmap};
pub use motions::RigidMotion;
pub use solids::{NodeSet, ScalarField, Solid, UniformGrid};
pub use spectral::{SpectralField, TruncationSpec};

/// Shared point/vector aliases; all geometry is double precision.
pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;
