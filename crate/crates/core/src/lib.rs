//! Post-processing and training-side arithmetic for kernel-based, shape-robust
//! scene-text detection.
//!
//! A detector predicts `n` score maps per image: the smallest "kernel" of every
//! text instance up to its full extent. Small kernels of neighbouring
//! instances are far apart, so labeling them separates instances that the
//! full-scale mask would merge; [`pse::pse`] then grows each kernel back out,
//! one scale at a time, by breadth-first expansion.
//!
//! - [`geometry`]: polygon area/perimeter, shrink offsets, scale ratios, inward offsetting
//! - [`labelgen`]: rasterized per-scale kernel masks for training
//! - [`pse`]: thresholding, component labeling, scale expansion, detection extraction
//! - [`loss`]: dice, OHEM training mask, complete/shrunk losses
//! - [`augment`]: joint image/label transforms
//! - [`metrics`]: polygon IoU and precision/recall/F-measure
//! - [`io`]: binary score stacks, annotation/detection JSON, synthetic fixtures, rendering
//! - [`bench`]: timing harness for expansion cost versus image size

pub mod augment;
pub mod bench;
pub mod error;
pub mod geometry;
pub mod io;
pub mod labelgen;
pub mod loss;
pub mod metrics;
pub mod pse;
pub mod raster;

pub use error::{Error, Result};
pub use geometry::{KernelSpec, Point, Polygon, ShrinkOffset};
pub use raster::{BinaryMask, LabelMap, ScoreMap};
