//! Reconstruction-based out-of-distribution detection benchmark for 2D
//! grayscale brain-like images.
//!
//! The crate covers the whole pipeline: a seeded phantom corpus, local
//! and k-space artifact generators with ground-truth masks, linear
//! reconstructors, per-pixel reconstruction metrics, anomaly-map
//! ensembling, and pixel- and slice-level evaluation.
//!
//! Raster, Fourier and SSIM code is generic over [`Real`] (`f32` or
//! `f64`); the pipeline runs in `f64`, see the aliases below.

pub mod artifacts;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod fourier;
pub mod imgcore;
pub mod metrics;
pub mod pipeline;
pub mod reconstructors;
pub mod rng;
pub mod scalar;
pub mod scoring;

pub use error::{Error, Result};
pub use fourier::ComplexImage2D;
pub use imgcore::{Image2D, Mask2D};
pub use scalar::Real;

/// Double-precision raster used throughout the pipeline.
pub type Image = Image2D<f64>;
/// Single-precision raster.
pub type ImageF32 = Image2D<f32>;
/// Double-precision complex raster.
pub type ComplexImage = ComplexImage2D<f64>;
