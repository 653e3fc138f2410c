//! Doc-test shim for the book under `book/`.
//!
//! mdBook cannot run code fences against crate dependencies, so each
//! chapter is included here as a doc comment and `cargo test --doc`
//! executes every `rust` fence. One module per chapter keeps failure
//! reports attributable to the chapter they come from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/raster-images.md")]
pub mod raster_images {}

#[doc = include_str!("../../../book/src/homography-skew.md")]
pub mod homography_skew {}

#[doc = include_str!("../../../book/src/photometric.md")]
pub mod photometric {}

#[doc = include_str!("../../../book/src/camera-model.md")]
pub mod camera_model {}

#[doc = include_str!("../../../book/src/cylindrical-panorama.md")]
pub mod cylindrical_panorama {}

#[doc = include_str!("../../../book/src/segmentation-metrics.md")]
pub mod segmentation_metrics {}

#[doc = include_str!("../../../book/src/batch-pipeline.md")]
pub mod batch_pipeline {}
