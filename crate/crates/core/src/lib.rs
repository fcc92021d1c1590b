//! Sparse coding and dictionary learning of landmark sequences in Kendall's
//! shape space, with a DTW / Fourier temporal pyramid / linear SVM
//! classification pipeline on top.
//!
//! Module map:
//!
//! - [`shape`]: pre-shapes, shapes, geodesics, log/exp maps, Procrustes
//!   distances and weighted Karcher means for 2D and 3D landmarks.
//! - [`kernel`]: the Procrustes Gaussian kernel, Gram matrices and
//!   positive-definiteness diagnostics.
//! - [`sparse`]: l1-regularized quadratic coding solvers (with and without an
//!   affine constraint) and a Euclidean dictionary-learning baseline.
//! - [`intrinsic`]: coding on the tangent space of each query and intrinsic
//!   dictionary learning.
//! - [`extrinsic`]: kernel (RKHS) coding and dictionary learning.
//! - [`init`]: kernel clustering and principal geodesic analysis for
//!   dictionary initialization.
//! - [`temporal`]: per-frame coding of trajectories, displacement series, DTW
//!   and Fourier temporal pyramid features.
//! - [`classify`]: one-vs-rest linear SVM.
//! - [`pipeline`], [`io`], [`synth`]: end-to-end training and evaluation,
//!   file formats and synthetic data.
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`
//! directory (`cargo run -p kscdl --example <name>`).

pub mod classify;
pub mod error;
pub mod extrinsic;
pub mod init;
pub mod intrinsic;
pub mod io;
pub mod kernel;
pub mod pipeline;
pub mod shape;
pub mod sparse;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
pub use shape::{LandmarkConfiguration, PreShape, ShapePoint, TangentVector};
