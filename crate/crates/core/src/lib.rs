//! Registration and fusion toolkit for misaligned single-channel image
//! pairs.
//!
//! The crate covers the numerical core of a register-then-fuse pipeline:
//!
//! - [`raster`]: image containers, PGM/PFM I/O, bilinear sampling, and the
//!   shared filtering primitives (Laplacian, Sobel, Gaussian, SSIM).
//! - [`geometry`]: six-parameter affine transforms and per-pixel
//!   deformation fields, their inverses, composition, and warp application.
//! - [`simulate`]: seeded misalignment generators producing ground-truth
//!   transform pairs for evaluation.
//! - [`mask`]: reconstructible-area masks that confine losses and metrics
//!   to content surviving the warp round trip.
//! - [`metrics`]: masked and unmasked registration metrics plus
//!   fusion-quality scores.
//! - [`fusion`]: gradient-aware fusion by direct energy minimization.
//! - [`register`]: coarse affine and fine deformable registration by
//!   direct optimization of the masked objectives.
//!
//! All operations are pure functions of their inputs (plus an explicit seed
//! where randomness is involved) and safe to call concurrently.

pub mod error;
pub mod fusion;
pub mod geometry;
pub mod mask;
pub mod metrics;
pub mod raster;
pub mod register;
pub mod simulate;

#[cfg(feature = "testkit")]
pub mod testkit;

pub use error::{Error, Result};
