//! Exact four-point homography estimation and the perspective skew warp.
//!
//! A homography maps plane points `(u, v)` to `(u', v')` through a 3x3
//! matrix in homogeneous coordinates. With the bottom-right coefficient
//! fixed to 1, the remaining eight coefficients are determined exactly by
//! four point correspondences, which is all the skew augmentation needs:
//! the four image corners and their stretched positions.
//!
//! The skew warp stretches one vertical edge of the image outward by
//! `d = w * tan(alpha)` and views the result through the original window,
//! simulating how a forward-view scene appears in a side-oriented camera.

use crate::error::{Error, Result};
use crate::raster::{remap_image, remap_labels, InverseMap, LabelMap, RasterImage, ValidityMask};

/// Pivot magnitude below which a linear system is treated as singular.
const PIVOT_EPS: f64 = 1e-12;

/// 3x3 projective transform, row-major, normalized so the bottom-right
/// coefficient is 1 whenever it is nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: [f64; 9],
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            h: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    /// Wrap raw row-major coefficients, normalizing and checking
    /// invertibility.
    pub fn from_coeffs(mut h: [f64; 9]) -> Result<Self> {
        if h[8].abs() > PIVOT_EPS {
            let h33 = h[8];
            for v in h.iter_mut() {
                *v /= h33;
            }
            h[8] = 1.0;
        }
        let m = Self { h };
        if m.det().abs() <= PIVOT_EPS {
            return Err(Error::Singular("homography is not invertible"));
        }
        Ok(m)
    }

    pub fn coeffs(&self) -> [f64; 9] {
        self.h
    }

    fn det(&self) -> f64 {
        let h = &self.h;
        h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6])
            + h[2] * (h[3] * h[7] - h[4] * h[6])
    }

    /// Solve for the homography mapping each `src[i]` to `dst[i]`.
    ///
    /// Errors with a singular-system report when three of the source or
    /// destination points are collinear.
    pub fn solve(src: &[[f64; 2]; 4], dst: &[[f64; 2]; 4]) -> Result<Self> {
        // Two equations per correspondence in the eight unknowns
        // h11..h32 (h33 = 1):
        //   u' = h11 u + h12 v + h13 - h31 u u' - h32 v u'
        //   v' = h21 u + h22 v + h23 - h31 u v' - h32 v v'
        let mut a = [[0.0f64; 9]; 8];
        for i in 0..4 {
            let [u, v] = src[i];
            let [up, vp] = dst[i];
            a[2 * i] = [u, v, 1.0, 0.0, 0.0, 0.0, -u * up, -v * up, up];
            a[2 * i + 1] = [0.0, 0.0, 0.0, u, v, 1.0, -u * vp, -v * vp, vp];
        }
        let x = gaussian_solve(&mut a)?;
        Self::from_coeffs([x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], 1.0])
    }

    /// Matrix inverse (itself a homography, renormalized).
    pub fn invert(&self) -> Result<Self> {
        let h = &self.h;
        let det = self.det();
        if det.abs() <= PIVOT_EPS {
            return Err(Error::Singular("homography is not invertible"));
        }
        let adj = [
            h[4] * h[8] - h[5] * h[7],
            h[2] * h[7] - h[1] * h[8],
            h[1] * h[5] - h[2] * h[4],
            h[5] * h[6] - h[3] * h[8],
            h[0] * h[8] - h[2] * h[6],
            h[2] * h[3] - h[0] * h[5],
            h[3] * h[7] - h[4] * h[6],
            h[1] * h[6] - h[0] * h[7],
            h[0] * h[4] - h[1] * h[3],
        ];
        let mut out = [0.0; 9];
        for (o, a) in out.iter_mut().zip(adj.iter()) {
            *o = a / det;
        }
        Self::from_coeffs(out)
    }

    /// Project a point. Errors if the point maps to infinity.
    pub fn apply(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let h = &self.h;
        let d = h[6] * p[0] + h[7] * p[1] + h[8];
        if d.abs() < PIVOT_EPS {
            return Err(Error::PointAtInfinity);
        }
        Ok([
            (h[0] * p[0] + h[1] * p[1] + h[2]) / d,
            (h[3] * p[0] + h[4] * p[1] + h[5]) / d,
        ])
    }

    /// Composition: `self.then(&g)` applies `self` first, then `g`.
    pub fn then(&self, g: &Homography) -> Result<Self> {
        let a = &g.h;
        let b = &self.h;
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[3 * r + c] =
                    a[3 * r] * b[c] + a[3 * r + 1] * b[3 + c] + a[3 * r + 2] * b[6 + c];
            }
        }
        Self::from_coeffs(out)
    }
}

/// Gaussian elimination with partial pivoting on an augmented 8x9 system.
fn gaussian_solve(a: &mut [[f64; 9]; 8]) -> Result<[f64; 8]> {
    for col in 0..8 {
        let pivot_row = (col..8)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < PIVOT_EPS {
            return Err(Error::Singular(
                "degenerate point configuration (three points collinear)",
            ));
        }
        a.swap(col, pivot_row);
        let pivot = a[col][col];
        for row in col + 1..8 {
            let factor = a[row][col] / pivot;
            if factor != 0.0 {
                for k in col..9 {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
    }
    let mut x = [0.0f64; 8];
    for row in (0..8).rev() {
        let mut acc = a[row][8];
        for k in row + 1..8 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Which vertical edge of the image the skew stretches outward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkewSide {
    Left,
    Right,
}

impl SkewSide {
    pub fn tag(&self) -> char {
        match self {
            SkewSide::Left => 'L',
            SkewSide::Right => 'R',
        }
    }
}

/// Parameters of one skew warp. `alpha_deg` is restricted to the studied
/// range `[10, 70]` degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewSpec {
    pub side: SkewSide,
    pub alpha_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl SkewSpec {
    pub fn new(side: SkewSide, alpha_deg: f64, width: u32, height: u32) -> Result<Self> {
        if !(10.0..=70.0).contains(&alpha_deg) {
            return Err(Error::InvalidParam(format!(
                "skew alpha must be in [10, 70] degrees, got {alpha_deg}"
            )));
        }
        if width < 2 || height < 2 {
            return Err(Error::InvalidParam(format!(
                "skew needs at least a 2x2 image, got {width}x{height}"
            )));
        }
        Ok(Self {
            side,
            alpha_deg,
            width,
            height,
        })
    }
}

/// Corner correspondences of the skew warp: the source rectangle and the
/// stretched quad. The displaced corners move outward by `d = w * tan(alpha)`
/// along the chosen edge.
///
/// Unlike [`SkewSpec::new`] this accepts any angle; the zero-displacement
/// case is useful as an identity check.
pub fn skew_quad(
    side: SkewSide,
    alpha_deg: f64,
    width: u32,
    height: u32,
) -> ([[f64; 2]; 4], [[f64; 2]; 4]) {
    let w = (width - 1) as f64;
    let h = (height - 1) as f64;
    let d = width as f64 * alpha_deg.to_radians().tan();
    let src = [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]];
    let dst = match side {
        SkewSide::Left => [[0.0, -d], [w, 0.0], [w, h], [0.0, h + d]],
        SkewSide::Right => [[0.0, 0.0], [w, -d], [w, h + d], [0.0, h]],
    };
    (src, dst)
}

/// Corner correspondences for a validated [`SkewSpec`].
pub fn build_skew_quad(spec: &SkewSpec) -> ([[f64; 2]; 4], [[f64; 2]; 4]) {
    skew_quad(spec.side, spec.alpha_deg, spec.width, spec.height)
}

/// Snap coordinates that float rounding pushed marginally past a boundary
/// back onto it. The skew quad contains the source rectangle by
/// construction, so every true source coordinate is in bounds; jitter on
/// the shared edge must not knock edge pixels out of the mask.
fn snap_into_rect(c: f64, max: f64) -> f64 {
    const SNAP: f64 = 1e-9;
    if (-SNAP..0.0).contains(&c) {
        0.0
    } else if c > max && c <= max + SNAP {
        max
    } else {
        c
    }
}

/// Inverse map of the skew warp for a canvas of the source dimensions.
pub fn skew_inverse_map(spec: &SkewSpec) -> Result<(InverseMap, Homography)> {
    let (src, dst) = build_skew_quad(spec);
    let h = Homography::solve(&src, &dst)?;
    let hinv = h.invert()?;
    let max_x = (spec.width - 1) as f64;
    let max_y = (spec.height - 1) as f64;
    let map = InverseMap::from_fn(spec.width, spec.height, |x, y| {
        match hinv.apply([x as f64, y as f64]) {
            Ok([sx, sy]) => Some((snap_into_rect(sx, max_x), snap_into_rect(sy, max_y))),
            Err(_) => None,
        }
    })?;
    Ok((map, h))
}

/// Warp an image (and optionally its label map, with the identical
/// geometry but nearest-neighbor sampling) by the skew homography. The
/// output keeps the source dimensions; because the stretched quad contains
/// the source rectangle, the returned mask is all-true.
pub fn skew_warp(
    img: &RasterImage,
    labels: Option<&LabelMap>,
    spec: &SkewSpec,
) -> Result<(RasterImage, Option<LabelMap>, ValidityMask)> {
    if img.width() != spec.width || img.height() != spec.height {
        return Err(Error::DimensionMismatch(format!(
            "skew spec is {}x{} but image is {}x{}",
            spec.width,
            spec.height,
            img.width(),
            img.height()
        )));
    }
    if let Some(l) = labels {
        if l.width() != img.width() || l.height() != img.height() {
            return Err(Error::DimensionMismatch(format!(
                "labels are {}x{} but image is {}x{}",
                l.width(),
                l.height(),
                img.width(),
                img.height()
            )));
        }
    }
    let (map, _) = skew_inverse_map(spec)?;
    let (out_img, mask) = remap_image(img, &map, [0, 0, 0])?;
    let out_labels = match labels {
        Some(l) => Some(remap_labels(l, &map)?.0),
        None => None,
    };
    Ok((out_img, out_labels, mask))
}
