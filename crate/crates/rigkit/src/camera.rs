//! Pinhole camera with Brown-Conrady lens distortion.
//!
//! Normalized coordinates are `(x, y) = ((px - cx)/fx, (py - cy)/fy)`. The
//! distortion model uses three radial coefficients and two tangential ones:
//!
//! ```text
//! x_d = x (1 + k1 r^2 + k2 r^4 + k3 r^6) + 2 p1 x y + p2 (r^2 + 2 x^2)
//! y_d = y (1 + k1 r^2 + k2 r^4 + k3 r^6) + 2 p2 x y + p1 (r^2 + 2 y^2)
//! ```
//!
//! The inverse has no closed form; [`DistortionCoeffs::undistort_point`]
//! runs a fixed-point iteration that converges for automotive-lens
//! magnitudes and reports failure instead of extrapolating.
//!
//! [`undistort_full_frame`] rectifies a whole frame without cropping: the
//! output canvas is grown to contain every undistorted source pixel and a
//! validity mask marks the padding, so content in the corners of
//! wide-angle frames survives.

use crate::error::{Error, Result};
use crate::raster::{
    remap_image, remap_labels, InverseMap, LabelMap, RasterImage, ValidityMask,
};

/// Focal lengths, principal point and sensor size, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidParam(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(Error::InvalidParam(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} sensor"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Pixel -> normalized coordinates.
    #[inline]
    pub fn to_normalized(&self, px: f64, py: f64) -> (f64, f64) {
        ((px - self.cx) / self.fx, (py - self.cy) / self.fy)
    }

    /// Normalized -> pixel coordinates.
    #[inline]
    pub fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        (x * self.fx + self.cx, y * self.fy + self.cy)
    }
}

/// Brown-Conrady distortion coefficients (dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct DistortionCoeffs {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Convergence threshold of the inverse iteration (normalized units).
const UNDISTORT_STEP_EPS: f64 = 1e-10;
/// Iteration cap; exceeding it reports divergence.
const UNDISTORT_MAX_ITERS: u32 = 50;

impl DistortionCoeffs {
    pub fn new(k1: f64, k2: f64, k3: f64, p1: f64, p2: f64) -> Result<Self> {
        for (name, v) in [("k1", k1), ("k2", k2), ("k3", k3), ("p1", p1), ("p2", p2)] {
            if !v.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "distortion coefficient {name} must be finite, got {v}"
                )));
            }
        }
        Ok(Self { k1, k2, k3, p1, p2 })
    }

    pub fn is_zero(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0 && self.k3 == 0.0 && self.p1 == 0.0 && self.p2 == 0.0
    }

    /// Radial factor `1 + k1 r^2 + k2 r^4 + k3 r^6` at squared radius `r2`.
    #[inline]
    pub fn radial(&self, r2: f64) -> f64 {
        1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3))
    }

    #[inline]
    fn tangential(&self, x: f64, y: f64, r2: f64) -> (f64, f64) {
        (
            2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x),
            2.0 * self.p2 * x * y + self.p1 * (r2 + 2.0 * y * y),
        )
    }

    /// Forward model: ideal normalized point -> distorted normalized point.
    #[inline]
    pub fn distort_point(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y;
        let radial = self.radial(r2);
        let (tx, ty) = self.tangential(x, y, r2);
        (x * radial + tx, y * radial + ty)
    }

    /// Inverse model by fixed-point iteration
    /// `x <- (d - tangential(x)) / radial(x)`, initialized at the distorted
    /// point, until the step drops below 1e-10 or 50 iterations pass.
    pub fn undistort_point(&self, xd: f64, yd: f64) -> Result<(f64, f64)> {
        if self.is_zero() {
            return Ok((xd, yd));
        }
        let (mut x, mut y) = (xd, yd);
        let mut last_step = f64::INFINITY;
        for _ in 0..UNDISTORT_MAX_ITERS {
            let r2 = x * x + y * y;
            let radial = self.radial(r2);
            let (tx, ty) = self.tangential(x, y, r2);
            let nx = (xd - tx) / radial;
            let ny = (yd - ty) / radial;
            last_step = (nx - x).abs().max((ny - y).abs());
            x = nx;
            y = ny;
            if last_step < UNDISTORT_STEP_EPS {
                return Ok((x, y));
            }
        }
        Err(Error::UndistortDiverged {
            iterations: UNDISTORT_MAX_ITERS,
            last_step,
        })
    }
}

/// Border samples per edge when computing full-frame canvas bounds.
const BORDER_SAMPLES_PER_EDGE: usize = 16;

/// Result of planning a full-frame undistortion: the inverse map to feed
/// to a remap, and the intrinsics describing the enlarged canvas (same
/// focal lengths, principal point shifted by the canvas offset).
pub fn undistort_map(intr: &Intrinsics, dist: &DistortionCoeffs) -> Result<(InverseMap, Intrinsics)> {
    let w = intr.width;
    let h = intr.height;
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;

    // Undistort a dense sampling of the border (pixel centers): corners
    // plus 16 interior samples per edge. Distortion is smooth and
    // low-order, so extremes of the undistorted footprint lie on the
    // border within a pixel.
    let mut samples = Vec::with_capacity(4 * (BORDER_SAMPLES_PER_EDGE + 1) + 4);
    let steps = BORDER_SAMPLES_PER_EDGE as f64 + 1.0;
    for i in 0..=BORDER_SAMPLES_PER_EDGE + 1 {
        let t = i as f64 / steps;
        samples.push((t * max_x, 0.0));
        samples.push((t * max_x, max_y));
        samples.push((0.0, t * max_y));
        samples.push((max_x, t * max_y));
    }

    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (px, py) in samples {
        let (xd, yd) = intr.to_normalized(px, py);
        let (xu, yu) = dist.undistort_point(xd, yd)?;
        let (ux, uy) = intr.to_pixel(xu, yu);
        xmin = xmin.min(ux);
        xmax = xmax.max(ux);
        ymin = ymin.min(uy);
        ymax = ymax.max(uy);
    }

    let x0 = xmin.floor();
    let y0 = ymin.floor();
    let out_w = (xmax.ceil() - x0) as u32 + 1;
    let out_h = (ymax.ceil() - y0) as u32 + 1;
    let out_intr = Intrinsics {
        fx: intr.fx,
        fy: intr.fy,
        cx: intr.cx - x0,
        cy: intr.cy - y0,
        width: out_w,
        height: out_h,
    };

    // Rendering is pure forward distortion per destination pixel; the
    // iterative inverse stays out of the hot loop.
    let map = InverseMap::from_fn(out_w, out_h, |x, y| {
        let (xn, yn) = out_intr.to_normalized(x as f64, y as f64);
        let (xd, yd) = dist.distort_point(xn, yn);
        let (sx, sy) = intr.to_pixel(xd, yd);
        Some((sx, sy))
    })?;
    Ok((map, out_intr))
}

/// Rectify a frame onto a canvas that keeps every source pixel, padding
/// marked false in the mask. Returns the image, the mask, and intrinsics
/// for the new canvas.
pub fn undistort_full_frame(
    img: &RasterImage,
    intr: &Intrinsics,
    dist: &DistortionCoeffs,
) -> Result<(RasterImage, ValidityMask, Intrinsics)> {
    check_frame(img.width(), img.height(), intr)?;
    let (map, out_intr) = undistort_map(intr, dist)?;
    let (out, mask) = remap_image(img, &map, [0, 0, 0])?;
    Ok((out, mask, out_intr))
}

/// Label variant of [`undistort_full_frame`]: identical geometry,
/// nearest-neighbor sampling, ignore-value fill.
pub fn undistort_full_frame_labels(
    labels: &LabelMap,
    intr: &Intrinsics,
    dist: &DistortionCoeffs,
) -> Result<(LabelMap, ValidityMask, Intrinsics)> {
    check_frame(labels.width(), labels.height(), intr)?;
    let (map, out_intr) = undistort_map(intr, dist)?;
    let (out, mask) = remap_labels(labels, &map)?;
    Ok((out, mask, out_intr))
}

fn check_frame(w: u32, h: u32, intr: &Intrinsics) -> Result<()> {
    if w != intr.width || h != intr.height {
        return Err(Error::DimensionMismatch(format!(
            "frame is {w}x{h} but intrinsics declare {}x{}",
            intr.width, intr.height
        )));
    }
    Ok(())
}
