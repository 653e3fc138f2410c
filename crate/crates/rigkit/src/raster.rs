//! Raster buffers and the resampling kernels every warp in this crate runs on.
//!
//! Three pixel containers exist: [`RasterImage`] (8-bit RGB), [`LabelMap`]
//! (8-bit class indices with a reserved ignore value) and [`ValidityMask`]
//! (one boolean per pixel marking real content versus padding). Geometric
//! operations never touch pixels directly; they build an [`InverseMap`]
//! (destination pixel -> continuous source coordinate) and hand it to
//! [`remap_image`] or [`remap_labels`].
//!
//! Coordinate convention used by the whole crate: pixel `(i, j)` has its
//! center at continuous `(i, j)`, `x` grows rightward, `y` downward. A
//! continuous coordinate is in bounds iff it lies in `[0, w-1] x [0, h-1]`.
//!
//! Images are resampled bilinearly with per-channel round-half-up; label
//! maps are always nearest-neighbor so that no class index is ever invented
//! by blending.

use std::path::Path;

use crate::error::{Error, Result};

/// Default class index reserved for "no label".
pub const DEFAULT_IGNORE: u8 = 255;

/// 8-bit 3-channel image, row-major interleaved RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RasterImage {
    /// All-black image. Width and height must be at least 1.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        Self::filled(width, height, [0, 0, 0])
    }

    /// Image filled with a constant color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            data.extend_from_slice(&rgb);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Wrap an existing interleaved RGB buffer (length must be `w*h*3`).
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::BufferSize {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Mean over all samples (all channels pooled), used by photometric tests.
    pub fn mean_sample(&self) -> f64 {
        let sum: u64 = self.data.iter().map(|&v| v as u64).sum();
        sum as f64 / self.data.len() as f64
    }
}

/// 8-bit single-channel class-index image.
///
/// `ignore_value` marks pixels that carry no label; warps fill uncovered
/// pixels with it and metrics skip it entirely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    data: Vec<u8>,
    ignore_value: u8,
}

impl LabelMap {
    /// Map filled with the ignore value.
    pub fn new(width: u32, height: u32, ignore_value: u8) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![ignore_value; width as usize * height as usize],
            ignore_value,
        })
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>, ignore_value: u8) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::BufferSize {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
            ignore_value,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn ignore_value(&self) -> u8 {
        self.ignore_value
    }

    /// Reinterpret with a different ignore value (pixels are untouched).
    pub fn with_ignore_value(mut self, ignore_value: u8) -> Self {
        self.ignore_value = ignore_value;
        self
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    /// Sorted set of distinct values present (including the ignore value if used).
    pub fn value_set(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &v in &self.data {
            seen[v as usize] = true;
        }
        (0u16..256)
            .filter(|&v| seen[v as usize])
            .map(|v| v as u8)
            .collect()
    }
}

/// Per-pixel boolean: true where the pixel carries real image content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl ValidityMask {
    pub fn new(width: u32, height: u32, value: bool) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            bits: vec![value; width as usize * height as usize],
        })
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(Error::BufferSize {
                expected,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn all_true(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn true_fraction(&self) -> f64 {
        self.bits.iter().filter(|&&b| b).count() as f64 / self.bits.len() as f64
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParam(format!(
            "raster dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Destination-indexed warp table: per destination pixel, the continuous
/// source coordinate to sample, or nothing ("unmapped").
#[derive(Debug, Clone)]
pub struct InverseMap {
    width: u32,
    height: u32,
    // NaN pairs encode "unmapped".
    coords: Vec<[f64; 2]>,
}

impl InverseMap {
    pub fn unmapped(width: u32, height: u32) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            coords: vec![[f64::NAN, f64::NAN]; width as usize * height as usize],
        })
    }

    /// Identity map: every destination pixel samples its own coordinate.
    pub fn identity(width: u32, height: u32) -> Result<Self> {
        Self::from_fn(width, height, |x, y| Some((x as f64, y as f64)))
    }

    /// Build from a closure over destination pixel indices.
    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> Option<(f64, f64)>,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut coords = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                coords.push(match f(x, y) {
                    Some((sx, sy)) => [sx, sy],
                    None => [f64::NAN, f64::NAN],
                });
            }
        }
        Ok(Self {
            width,
            height,
            coords,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Option<(f64, f64)> {
        let [sx, sy] = self.coords[y as usize * self.width as usize + x as usize];
        if sx.is_nan() {
            None
        } else {
            Some((sx, sy))
        }
    }

    pub fn set(&mut self, x: u32, y: u32, coord: Option<(f64, f64)>) {
        self.coords[y as usize * self.width as usize + x as usize] = match coord {
            Some((sx, sy)) => [sx, sy],
            None => [f64::NAN, f64::NAN],
        };
    }
}

/// Round half-up to an 8-bit sample. Input is expected in `[0, 255]`.
#[inline]
pub(crate) fn round_half_up_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[inline]
fn in_bounds(x: f64, y: f64, width: u32, height: u32) -> bool {
    x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64
}

/// Area-weighted blend of the four pixels around `(x, y)`, rounded half-up
/// per channel. Returns `None` for any coordinate outside `[0,w-1] x [0,h-1]`.
pub fn sample_bilinear(img: &RasterImage, x: f64, y: f64) -> Option<[u8; 3]> {
    if !in_bounds(x, y, img.width, img.height) {
        return None;
    }
    let x0 = x.floor() as u32;
    let y0 = y.floor() as u32;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;

    let p00 = img.pixel(x0, y0);
    let p10 = img.pixel(x1, y0);
    let p01 = img.pixel(x0, y1);
    let p11 = img.pixel(x1, y1);

    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bot = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = round_half_up_u8(top * (1.0 - fy) + bot * fy);
    }
    Some(out)
}

/// Value of the pixel whose center is closest to `(x, y)`, both axes rounded
/// half toward +infinity. Same out-of-bounds rule as [`sample_bilinear`].
pub fn sample_nearest(map: &LabelMap, x: f64, y: f64) -> Option<u8> {
    if !in_bounds(x, y, map.width, map.height) {
        return None;
    }
    let ix = ((x + 0.5).floor() as u32).min(map.width - 1);
    let iy = ((y + 0.5).floor() as u32).min(map.height - 1);
    Some(map.get(ix, iy))
}

/// Render an image through an inverse map. Destination pixels whose map
/// entry is unmapped, or whose source coordinate falls outside the source,
/// receive `fill` and a false mask bit.
pub fn remap_image(
    src: &RasterImage,
    map: &InverseMap,
    fill: [u8; 3],
) -> Result<(RasterImage, ValidityMask)> {
    let mut out = RasterImage::filled(map.width, map.height, fill)?;
    let mut mask = ValidityMask::new(map.width, map.height, false)?;
    for y in 0..map.height {
        for x in 0..map.width {
            if let Some((sx, sy)) = map.get(x, y) {
                if let Some(rgb) = sample_bilinear(src, sx, sy) {
                    out.set_pixel(x, y, rgb);
                    mask.set(x, y, true);
                }
            }
        }
    }
    Ok((out, mask))
}

/// Label variant of [`remap_image`]: nearest-neighbor sampling, fill is the
/// source map's ignore value. Never introduces a class index absent from
/// the source.
pub fn remap_labels(src: &LabelMap, map: &InverseMap) -> Result<(LabelMap, ValidityMask)> {
    let mut out = LabelMap::new(map.width, map.height, src.ignore_value)?;
    let mut mask = ValidityMask::new(map.width, map.height, false)?;
    for y in 0..map.height {
        for x in 0..map.width {
            if let Some((sx, sy)) = map.get(x, y) {
                if let Some(v) = sample_nearest(src, sx, sy) {
                    out.set(x, y, v);
                    mask.set(x, y, true);
                }
            }
        }
    }
    Ok((out, mask))
}

/// A loaded raster of either kind, decided by the file's channel count.
#[derive(Debug, Clone)]
pub enum Raster {
    /// 3-channel file.
    Image(RasterImage),
    /// 1-channel file.
    Labels(LabelMap),
}

/// Load an 8-bit PNG. 3-channel files become [`RasterImage`], 1-channel
/// files become [`LabelMap`] (ignore value [`DEFAULT_IGNORE`]). Anything
/// else is an [`Error::UnsupportedFormat`]; missing files and corrupt
/// streams are reported distinctly.
pub fn load_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let dynimg = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => {
            if io.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Decode {
                    path: path.to_path_buf(),
                    reason: "truncated stream".into(),
                }
            } else {
                Error::io(path, io)
            }
        }
        image::ImageError::Decoding(d) => Error::Decode {
            path: path.to_path_buf(),
            reason: d.to_string(),
        },
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: u.to_string(),
        },
        other => Error::Decode {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    match dynimg {
        image::DynamicImage::ImageRgb8(img) => {
            let (w, h) = (img.width(), img.height());
            Ok(Raster::Image(RasterImage::from_raw(w, h, img.into_raw())?))
        }
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = (img.width(), img.height());
            Ok(Raster::Labels(LabelMap::from_raw(
                w,
                h,
                img.into_raw(),
                DEFAULT_IGNORE,
            )?))
        }
        other => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!("expected 8-bit 1- or 3-channel PNG, got {other:?}"),
        }),
    }
}

/// Load a PNG that must be a 3-channel image.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    match load_raster(&path)? {
        Raster::Image(img) => Ok(img),
        Raster::Labels(_) => Err(Error::UnsupportedFormat {
            path: path.as_ref().to_path_buf(),
            detail: "expected a 3-channel image, found 1 channel".into(),
        }),
    }
}

/// Load a PNG that must be a 1-channel label map.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    match load_raster(&path)? {
        Raster::Labels(map) => Ok(map),
        Raster::Image(_) => Err(Error::UnsupportedFormat {
            path: path.as_ref().to_path_buf(),
            detail: "expected a 1-channel label map, found 3 channels".into(),
        }),
    }
}

/// Load a mask written by [`save_mask`]: 1-channel PNG with samples 0/255 only.
pub fn load_mask(path: impl AsRef<Path>) -> Result<ValidityMask> {
    let labels = load_labels(&path)?;
    let mut bits = Vec::with_capacity(labels.data().len());
    for &v in labels.data() {
        match v {
            0 => bits.push(false),
            255 => bits.push(true),
            other => {
                return Err(Error::UnsupportedFormat {
                    path: path.as_ref().to_path_buf(),
                    detail: format!("mask sample {other} is neither 0 nor 255"),
                })
            }
        }
    }
    ValidityMask::from_bits(labels.width(), labels.height(), bits)
}

fn save_png(
    path: &Path,
    width: u32,
    height: u32,
    data: &[u8],
    color: image::ExtendedColorType,
) -> Result<()> {
    image::save_buffer(path, data, width, height, color).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

/// Write an image as an 8-bit 3-channel PNG. Load/save round-trips are
/// bit-exact.
pub fn save_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    save_png(
        path.as_ref(),
        img.width,
        img.height,
        &img.data,
        image::ExtendedColorType::Rgb8,
    )
}

/// Write a label map as an 8-bit 1-channel PNG.
pub fn save_labels(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    save_png(
        path.as_ref(),
        map.width,
        map.height,
        &map.data,
        image::ExtendedColorType::L8,
    )
}

/// Write a mask as a 1-channel PNG with true -> 255 and false -> 0.
pub fn save_mask(mask: &ValidityMask, path: impl AsRef<Path>) -> Result<()> {
    let data: Vec<u8> = mask.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
    save_png(
        path.as_ref(),
        mask.width,
        mask.height,
        &data,
        image::ExtendedColorType::L8,
    )
}
