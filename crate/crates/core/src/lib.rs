//! Band structure of the Neumann Laplacian on a strip perforated by a
//! periodic transversal string of small holes.
//!
//! The crate is `no_std` (it needs `alloc`). It covers the whole numerical
//! pipeline: hole geometry, periodic meshing, Bloch finite elements and the
//! lowest eigenpairs, the unperturbed (limit) spectrum and its crossing
//! nodes, the boundary-layer constants `m1`, `m2`, `M` of the unit hole,
//! the first-order corrections built from them, and band/gap extraction
//! with the asymptotic comparison.
//!
//! File formats, configuration and the parallel sweep driver live in the
//! `gapstrip` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod bands;
pub mod cell_constants;
pub mod dense;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod limit;
pub mod mesh;
pub mod scalar;
pub mod sparse;

pub use error::Error;
pub use num_complex::Complex64;

pub use core::f64::consts::PI;
