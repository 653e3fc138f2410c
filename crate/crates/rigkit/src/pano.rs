//! Cylindrical panorama assembly for a multi-camera rig.
//!
//! The rig frame has x right, y down, z forward; the cylinder axis is the
//! rig vertical. A panorama pixel addresses a direction by azimuth
//! `theta` and cylindrical height `h = tan(elevation)`, so the ray is
//! `(sin theta, h, cos theta)` normalized. Because the axis is the rig
//! vertical, world-vertical lines land on constant-theta columns: they
//! stay straight in the panorama no matter how the cameras pitch.
//!
//! Compositing is winner-take-all: every output pixel is sampled from the
//! single camera whose optical axis is angularly closest among those that
//! see the ray (projection in bounds and validity mask true). Ties break
//! by rig order, which keeps byte-identical outputs and lets label maps
//! ride the exact same winner map with nearest-neighbor sampling.

use rayon::prelude::*;
use serde::Deserialize;
use std::path::Path;

use crate::camera::{DistortionCoeffs, Intrinsics};
use crate::error::{Error, Result};
use crate::raster::{sample_bilinear, sample_nearest, LabelMap, RasterImage, ValidityMask};

/// Camera orientation in the rig frame, degrees.
///
/// Yaw turns the optical axis toward +x (right), pitch toward +y (down),
/// roll spins about the optical axis (camera x toward camera y).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, Deserialize)]
pub struct Extrinsics {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

impl Extrinsics {
    pub fn new(yaw_deg: f64, pitch_deg: f64, roll_deg: f64) -> Result<Self> {
        for (name, v) in [
            ("yaw", yaw_deg),
            ("pitch", pitch_deg),
            ("roll", roll_deg),
        ] {
            if !(v > -180.0 && v <= 180.0) {
                return Err(Error::InvalidParam(format!(
                    "{name} angle must lie in (-180, 180], got {v}"
                )));
            }
        }
        Ok(Self {
            yaw_deg,
            pitch_deg,
            roll_deg,
        })
    }

    pub fn identity() -> Self {
        Self {
            yaw_deg: 0.0,
            pitch_deg: 0.0,
            roll_deg: 0.0,
        }
    }
}

/// 3x3 rotation taking camera-frame vectors to the rig frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation([[f64; 3]; 3]);

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
        }
    }
    out
}

impl Rotation {
    /// Compose `R = R_yaw * R_pitch * R_roll` (applied in that order to
    /// camera-frame vectors to reach the rig frame).
    pub fn from_extrinsics(e: &Extrinsics) -> Self {
        let (sy, cy) = e.yaw_deg.to_radians().sin_cos();
        let (sp, cp) = e.pitch_deg.to_radians().sin_cos();
        let (sr, cr) = e.roll_deg.to_radians().sin_cos();
        // Yaw about the vertical (y) axis, positive turns +z toward +x.
        let yaw = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
        // Pitch about x, positive turns +z toward +y (downward).
        let pitch = [[1.0, 0.0, 0.0], [0.0, cp, sp], [0.0, -sp, cp]];
        // Roll about the optical axis.
        let roll = [[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]];
        Rotation(mat_mul(&yaw, &mat_mul(&pitch, &roll)))
    }

    pub fn identity() -> Self {
        Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Camera frame -> rig frame.
    #[inline]
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Rig frame -> camera frame (transpose of an orthonormal matrix).
    #[inline]
    pub fn apply_transpose(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
            m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
            m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    /// Rig-frame direction of the camera's optical axis (+z).
    pub fn optical_axis(&self) -> [f64; 3] {
        self.apply([0.0, 0.0, 1.0])
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Intrinsics plus orientation: everything the stitcher needs to know
/// about one (already undistorted) camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
}

/// One rig camera as described by the rig file.
#[derive(Debug, Clone, PartialEq)]
pub struct RigCamera {
    pub id: String,
    pub intrinsics: Intrinsics,
    pub distortion: DistortionCoeffs,
    pub extrinsics: Extrinsics,
}

/// The full camera arrangement plus the optional panorama resolution
/// override.
#[derive(Debug, Clone, PartialEq)]
pub struct Rig {
    pub cameras: Vec<RigCamera>,
    pub pixels_per_radian: Option<f64>,
}

impl Rig {
    pub fn new(cameras: Vec<RigCamera>, pixels_per_radian: Option<f64>) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::InvalidParam("rig needs at least one camera".into()));
        }
        for i in 0..cameras.len() {
            for j in i + 1..cameras.len() {
                if cameras[i].id == cameras[j].id {
                    return Err(Error::InvalidParam(format!(
                        "duplicate camera id '{}'",
                        cameras[i].id
                    )));
                }
            }
        }
        if let Some(s) = pixels_per_radian {
            if !(s > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "pixels_per_radian must be positive, got {s}"
                )));
            }
        }
        Ok(Self {
            cameras,
            pixels_per_radian,
        })
    }

    pub fn camera(&self, id: &str) -> Option<&RigCamera> {
        self.cameras.iter().find(|c| c.id == id)
    }

    /// Parse a rig file:
    ///
    /// ```toml
    /// pixels_per_radian = 300.0   # optional
    ///
    /// [[cameras]]
    /// id = "left"
    /// fx = 268.0
    /// fy = 311.0
    /// cx = 319.5
    /// cy = 179.5
    /// width = 640
    /// height = 360
    /// k1 = -0.05
    /// k2 = 0.0
    /// k3 = 0.0
    /// p1 = 0.0
    /// p2 = 0.0
    /// yaw_deg = -40.0
    /// pitch_deg = 0.0
    /// roll_deg = 0.0
    /// ```
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct FileCamera {
            id: String,
            fx: f64,
            fy: f64,
            cx: f64,
            cy: f64,
            width: u32,
            height: u32,
            #[serde(default)]
            k1: f64,
            #[serde(default)]
            k2: f64,
            #[serde(default)]
            k3: f64,
            #[serde(default)]
            p1: f64,
            #[serde(default)]
            p2: f64,
            #[serde(default)]
            yaw_deg: f64,
            #[serde(default)]
            pitch_deg: f64,
            #[serde(default)]
            roll_deg: f64,
        }
        #[derive(Deserialize)]
        struct FileRig {
            pixels_per_radian: Option<f64>,
            cameras: Vec<FileCamera>,
        }
        let file: FileRig =
            toml::from_str(text).map_err(|e| Error::config(origin, e.to_string()))?;
        let mut cameras = Vec::with_capacity(file.cameras.len());
        for c in file.cameras {
            cameras.push(RigCamera {
                intrinsics: Intrinsics::new(c.fx, c.fy, c.cx, c.cy, c.width, c.height)
                    .map_err(|e| Error::config(origin, format!("camera '{}': {e}", c.id)))?,
                distortion: DistortionCoeffs::new(c.k1, c.k2, c.k3, c.p1, c.p2)
                    .map_err(|e| Error::config(origin, format!("camera '{}': {e}", c.id)))?,
                extrinsics: Extrinsics::new(c.yaw_deg, c.pitch_deg, c.roll_deg)
                    .map_err(|e| Error::config(origin, format!("camera '{}': {e}", c.id)))?,
                id: c.id,
            });
        }
        Rig::new(cameras, file.pixels_per_radian).map_err(|e| Error::config(origin, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }
}

/// The panorama's angular raster: `theta` (azimuth) along columns,
/// cylindrical height along rows, both at `pixels_per_radian` resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylindricalCanvas {
    pixels_per_radian: f64,
    theta_min: f64,
    theta_max: f64,
    h_min: f64,
    h_max: f64,
    width: u32,
    height: u32,
}

/// Bounds are pulled inward by this much so that canvas pixels sitting
/// exactly on a frustum edge do not flip out of bounds on float jitter.
const BOUND_GUARD: f64 = 1e-9;

/// Border samples per frame edge when computing canvas bounds.
const CANVAS_EDGE_SAMPLES: usize = 64;

impl CylindricalCanvas {
    pub fn new(
        pixels_per_radian: f64,
        theta_min: f64,
        theta_max: f64,
        h_min: f64,
        h_max: f64,
    ) -> Result<Self> {
        if !(pixels_per_radian > 0.0) {
            return Err(Error::InvalidParam(format!(
                "pixels_per_radian must be positive, got {pixels_per_radian}"
            )));
        }
        if !(theta_max > theta_min) || !(h_max > h_min) {
            return Err(Error::InvalidParam(
                "canvas ranges must be non-empty".into(),
            ));
        }
        let width = ((theta_max - theta_min) * pixels_per_radian).round().max(1.0) as u32;
        let height = ((h_max - h_min) * pixels_per_radian).round().max(1.0) as u32;
        Ok(Self {
            pixels_per_radian,
            theta_min,
            theta_max,
            h_min,
            h_max,
            width,
            height,
        })
    }

    /// Bounds from the union of the cameras' frusta: every border pixel of
    /// every frame, pushed into the rig frame and onto the cylinder.
    ///
    /// The default resolution is the fx of the most forward-facing camera
    /// (smallest |yaw|), preserving native angular resolution near the
    /// panorama center.
    pub fn from_poses(poses: &[CameraPose], pixels_per_radian: Option<f64>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::InvalidParam(
                "canvas needs at least one camera".into(),
            ));
        }
        let mut theta_min = f64::INFINITY;
        let mut theta_max = f64::NEG_INFINITY;
        let mut h_min = f64::INFINITY;
        let mut h_max = f64::NEG_INFINITY;
        for pose in poses {
            let rot = Rotation::from_extrinsics(&pose.extrinsics);
            let intr = &pose.intrinsics;
            let max_x = (intr.width - 1) as f64;
            let max_y = (intr.height - 1) as f64;
            let steps = CANVAS_EDGE_SAMPLES as f64;
            for i in 0..=CANVAS_EDGE_SAMPLES {
                let t = i as f64 / steps;
                for (px, py) in [
                    (t * max_x, 0.0),
                    (t * max_x, max_y),
                    (0.0, t * max_y),
                    (max_x, t * max_y),
                ] {
                    let (xn, yn) = intr.to_normalized(px, py);
                    let ray = rot.apply(normalize([xn, yn, 1.0]));
                    let (theta, h) = cylinder_coords(ray);
                    theta_min = theta_min.min(theta);
                    theta_max = theta_max.max(theta);
                    h_min = h_min.min(h);
                    h_max = h_max.max(h);
                }
            }
        }
        let s = pixels_per_radian.unwrap_or_else(|| {
            poses
                .iter()
                .min_by(|a, b| {
                    a.extrinsics
                        .yaw_deg
                        .abs()
                        .total_cmp(&b.extrinsics.yaw_deg.abs())
                })
                .map(|p| p.intrinsics.fx)
                .unwrap()
        });
        Self::new(
            s,
            theta_min + BOUND_GUARD,
            theta_max - BOUND_GUARD,
            h_min + BOUND_GUARD,
            h_max - BOUND_GUARD,
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels_per_radian(&self) -> f64 {
        self.pixels_per_radian
    }

    pub fn theta_range(&self) -> (f64, f64) {
        (self.theta_min, self.theta_max)
    }

    pub fn h_range(&self) -> (f64, f64) {
        (self.h_min, self.h_max)
    }

    /// Azimuth of a (continuous) column coordinate.
    pub fn theta_of_col(&self, u: f64) -> f64 {
        self.theta_min + u / self.pixels_per_radian
    }

    /// Cylindrical height of a (continuous) row coordinate.
    pub fn h_of_row(&self, v: f64) -> f64 {
        self.h_min + v / self.pixels_per_radian
    }

    /// Row whose center is closest to h = 0 (the horizon).
    pub fn horizon_row(&self) -> u32 {
        let v = (-self.h_min * self.pixels_per_radian).round();
        (v.max(0.0) as u32).min(self.height - 1)
    }

    /// Unit rig-frame ray of a panorama pixel.
    #[inline]
    pub fn pixel_to_ray(&self, u: f64, v: f64) -> [f64; 3] {
        let theta = self.theta_of_col(u);
        let h = self.h_of_row(v);
        normalize([theta.sin(), h, theta.cos()])
    }
}

/// Azimuth and cylindrical height of a rig-frame direction.
pub fn cylinder_coords(ray: [f64; 3]) -> (f64, f64) {
    let horiz = (ray[0] * ray[0] + ray[2] * ray[2]).sqrt();
    (ray[0].atan2(ray[2]), ray[1] / horiz)
}

/// Rays essentially parallel to the image plane (or behind it) do not
/// project.
const BEHIND_EPS: f64 = 1e-6;

/// Project a unit rig-frame ray into a camera. Returns the pixel
/// coordinates, or None when the ray points behind the camera. Distortion
/// is applied when sampling original (not yet undistorted) frames.
pub fn project_ray(
    ray: [f64; 3],
    rot: &Rotation,
    intr: &Intrinsics,
    dist: Option<&DistortionCoeffs>,
) -> Option<(f64, f64)> {
    let cam = rot.apply_transpose(ray);
    if cam[2] <= BEHIND_EPS {
        return None;
    }
    let mut x = cam[0] / cam[2];
    let mut y = cam[1] / cam[2];
    if let Some(d) = dist {
        let (xd, yd) = d.distort_point(x, y);
        x = xd;
        y = yd;
    }
    Some(intr.to_pixel(x, y))
}

/// An undistorted frame ready for stitching.
#[derive(Debug, Clone, Copy)]
pub struct CameraFrame<'a> {
    pub pose: CameraPose,
    pub image: &'a RasterImage,
    pub mask: &'a ValidityMask,
}

/// An undistorted label frame ready for stitching.
#[derive(Debug, Clone, Copy)]
pub struct LabelFrame<'a> {
    pub pose: CameraPose,
    pub labels: &'a LabelMap,
    pub mask: &'a ValidityMask,
}

/// A stitched panorama: the composite, its validity mask, and one
/// contribution mask per camera recording which pixels it won.
#[derive(Debug, Clone)]
pub struct Stitched {
    pub image: RasterImage,
    pub mask: ValidityMask,
    pub contributions: Vec<ValidityMask>,
}

/// A stitched label panorama.
#[derive(Debug, Clone)]
pub struct StitchedLabels {
    pub labels: LabelMap,
    pub mask: ValidityMask,
    pub contributions: Vec<ValidityMask>,
}

struct ProjCamera<'a> {
    rot: Rotation,
    axis: [f64; 3],
    intr: Intrinsics,
    mask: &'a ValidityMask,
}

impl<'a> ProjCamera<'a> {
    fn new(pose: &CameraPose, mask: &'a ValidityMask) -> ProjCamera<'a> {
        let rot = Rotation::from_extrinsics(&pose.extrinsics);
        ProjCamera {
            axis: rot.optical_axis(),
            rot,
            intr: pose.intrinsics,
            mask,
        }
    }

    /// Source coordinate if the ray lands on valid content.
    #[inline]
    fn visible(&self, ray: [f64; 3]) -> Option<(f64, f64)> {
        let (x, y) = project_ray(ray, &self.rot, &self.intr, None)?;
        let max_x = (self.intr.width - 1) as f64;
        let max_y = (self.intr.height - 1) as f64;
        if x < 0.0 || y < 0.0 || x > max_x || y > max_y {
            return None;
        }
        let ix = ((x + 0.5).floor() as u32).min(self.intr.width - 1);
        let iy = ((y + 0.5).floor() as u32).min(self.intr.height - 1);
        if self.mask.get(ix, iy) {
            Some((x, y))
        } else {
            None
        }
    }
}

/// Per panorama pixel: the winning camera index and the source coordinate
/// to sample there. Shared verbatim by image and label stitching so both
/// produce the identical seam layout.
fn winner_map(canvas: &CylindricalCanvas, cams: &[ProjCamera<'_>]) -> Vec<Option<(u8, f64, f64)>> {
    let w = canvas.width() as usize;
    let mut out: Vec<Option<(u8, f64, f64)>> = vec![None; w * canvas.height() as usize];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, slot) in row.iter_mut().enumerate() {
            let ray = canvas.pixel_to_ray(x as f64, y as f64);
            let mut best: Option<(u8, f64, f64)> = None;
            let mut best_score = f64::NEG_INFINITY;
            for (ci, cam) in cams.iter().enumerate() {
                if let Some((sx, sy)) = cam.visible(ray) {
                    let score = dot(ray, cam.axis);
                    // Strict comparison: ties keep the earlier rig camera.
                    if score > best_score {
                        best_score = score;
                        best = Some((ci as u8, sx, sy));
                    }
                }
            }
            *slot = best;
        }
    });
    out
}

fn check_frames<T>(
    frames: &[T],
    dims: impl Fn(&T) -> (u32, u32, &CameraPose, (u32, u32)),
) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::RigMismatch("no frames supplied".into()));
    }
    if frames.len() > 255 {
        return Err(Error::RigMismatch("at most 255 cameras supported".into()));
    }
    for (i, f) in frames.iter().enumerate() {
        let (w, h, pose, (mw, mh)) = dims(f);
        if w != pose.intrinsics.width || h != pose.intrinsics.height {
            return Err(Error::DimensionMismatch(format!(
                "frame {i} is {w}x{h} but its intrinsics declare {}x{}",
                pose.intrinsics.width, pose.intrinsics.height
            )));
        }
        if (mw, mh) != (w, h) {
            return Err(Error::DimensionMismatch(format!(
                "frame {i} mask is {mw}x{mh} but the frame is {w}x{h}"
            )));
        }
    }
    Ok(())
}

/// Deposit the frames onto the canvas. Pixels visible to no camera are
/// black with a false mask bit; the contribution masks partition the
/// valid region.
pub fn stitch(frames: &[CameraFrame<'_>], canvas: &CylindricalCanvas) -> Result<Stitched> {
    check_frames(frames, |f| {
        (
            f.image.width(),
            f.image.height(),
            &f.pose,
            (f.mask.width(), f.mask.height()),
        )
    })?;
    let cams: Vec<ProjCamera<'_>> = frames
        .iter()
        .map(|f| ProjCamera::new(&f.pose, f.mask))
        .collect();
    let winners = winner_map(canvas, &cams);

    let (w, h) = (canvas.width(), canvas.height());
    let mut image = RasterImage::new(w, h)?;
    let mut mask = ValidityMask::new(w, h, false)?;
    let mut contributions = vec![ValidityMask::new(w, h, false)?; frames.len()];

    let row_len = w as usize * 3;
    image
        .data_mut()
        .par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w as usize {
                if let Some((ci, sx, sy)) = winners[y * w as usize + x] {
                    if let Some(rgb) = sample_bilinear(frames[ci as usize].image, sx, sy) {
                        row[x * 3..x * 3 + 3].copy_from_slice(&rgb);
                    }
                }
            }
        });
    for y in 0..h {
        for x in 0..w {
            if let Some((ci, _, _)) = winners[(y * w + x) as usize] {
                mask.set(x, y, true);
                contributions[ci as usize].set(x, y, true);
            }
        }
    }
    Ok(Stitched {
        image,
        mask,
        contributions,
    })
}

/// Label counterpart of [`stitch`]: identical winner selection, nearest
/// sampling, ignore fill. Never blends or invents class values.
pub fn stitch_labels(
    frames: &[LabelFrame<'_>],
    canvas: &CylindricalCanvas,
) -> Result<StitchedLabels> {
    check_frames(frames, |f| {
        (
            f.labels.width(),
            f.labels.height(),
            &f.pose,
            (f.mask.width(), f.mask.height()),
        )
    })?;
    let cams: Vec<ProjCamera<'_>> = frames
        .iter()
        .map(|f| ProjCamera::new(&f.pose, f.mask))
        .collect();
    let winners = winner_map(canvas, &cams);

    let (w, h) = (canvas.width(), canvas.height());
    let ignore = frames[0].labels.ignore_value();
    let mut labels = LabelMap::new(w, h, ignore)?;
    let mut mask = ValidityMask::new(w, h, false)?;
    let mut contributions = vec![ValidityMask::new(w, h, false)?; frames.len()];

    for y in 0..h {
        for x in 0..w {
            if let Some((ci, sx, sy)) = winners[(y * w + x) as usize] {
                if let Some(v) = sample_nearest(frames[ci as usize].labels, sx, sy) {
                    labels.set(x, y, v);
                }
                mask.set(x, y, true);
                contributions[ci as usize].set(x, y, true);
            }
        }
    }
    Ok(StitchedLabels {
        labels,
        mask,
        contributions,
    })
}
