//! Deterministic multi-camera image toolkit.
//!
//! rigkit does three jobs around a front-facing multi-camera rig:
//!
//! 1. **Dataset augmentation** for semantic segmentation: perspective skew
//!    that simulates side-oriented cameras, gamma correction with
//!    truncated-Gaussian exponents, and the classic flip / center-crop /
//!    noise / blur set ([`homography`], [`photo`]).
//! 2. **Panorama assembly**: Brown-Conrady full-frame undistortion with
//!    validity masks, then cylindrical reprojection and winner-take-all
//!    compositing of the rig's cameras into a single 180-degree-plus view
//!    ([`camera`], [`pano`]).
//! 3. **Segmentation scoring**: class remapping, confusion-matrix
//!    accumulation, per-class accuracy / mIoU / global accuracy ([`eval`]).
//!
//! Everything is deterministic: geometry is pure math, random augmentation
//! parameters come from per-item seeded streams, and batch runs produce
//! byte-identical output trees regardless of worker count ([`pipeline`]).
//!
//! The mdbook under `book/` walks through each subsystem with runnable
//! snippets; `rigkit-cli` exposes the batch operations as subcommands.

pub mod camera;
pub mod error;
pub mod eval;
pub mod homography;
pub mod pano;
pub mod photo;
pub mod pipeline;
pub mod raster;

pub use error::{Error, Result};
pub use raster::{LabelMap, RasterImage, ValidityMask};
