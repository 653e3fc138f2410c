//! Photometric augmentation: gamma correction with truncated-Gaussian
//! exponents, plus the classic flip / center-crop / noise / blur set.
//!
//! Gamma correction applies `O = I^(1/gamma)` per channel through a
//! 256-entry lookup table; gamma below 1 darkens, above 1 brightens. The
//! per-image gamma is drawn from a normal distribution truncated to
//! `(0, 3]` by rejection, so identical seeds give identical exponents.
//!
//! Photometric operations never touch label maps. The two geometric
//! operations here (flip, center-crop) transform image and labels through
//! the same pixel map.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::raster::{
    remap_image, remap_labels, round_half_up_u8, InverseMap, LabelMap, RasterImage,
};

/// Exclusive lower and inclusive upper bound of the truncated gamma range.
pub const GAMMA_LOWER: f64 = 0.0;
pub const GAMMA_UPPER: f64 = 3.0;

/// Sampling policy for per-image gamma exponents: a normal distribution
/// `N(mu, sigma^2)` truncated to `(0, 3]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GammaPolicy {
    pub mu: f64,
    pub sigma: f64,
}

impl GammaPolicy {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::InvalidParam(format!(
                "gamma sigma must be in [0, 1], got {sigma}"
            )));
        }
        if !(mu > GAMMA_LOWER && mu <= GAMMA_UPPER) {
            return Err(Error::InvalidParam(format!(
                "gamma mu must lie in (0, 3], got {mu}"
            )));
        }
        Ok(Self { mu, sigma })
    }
}

/// The classic augmentation set from the prior-work baseline, bundled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicAugSpec {
    pub flip_horizontal: bool,
    pub crop_fraction: f64,
    pub noise_sigma: f64,
    pub blur_sigma: f64,
}

impl ClassicAugSpec {
    pub fn new(
        flip_horizontal: bool,
        crop_fraction: f64,
        noise_sigma: f64,
        blur_sigma: f64,
    ) -> Result<Self> {
        if !(crop_fraction > 0.0 && crop_fraction <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "crop fraction must be in (0, 1], got {crop_fraction}"
            )));
        }
        if !noise_sigma.is_finite() || noise_sigma < 0.0 {
            return Err(Error::InvalidParam(format!(
                "noise sigma must be finite and non-negative, got {noise_sigma}"
            )));
        }
        if !blur_sigma.is_finite() || blur_sigma < 0.0 {
            return Err(Error::InvalidParam(format!(
                "blur sigma must be finite and non-negative, got {blur_sigma}"
            )));
        }
        Ok(Self {
            flip_horizontal,
            crop_fraction,
            noise_sigma,
            blur_sigma,
        })
    }

    /// Apply the whole set in flip, crop, noise, blur order.
    pub fn apply(
        &self,
        img: &RasterImage,
        labels: Option<&LabelMap>,
        rng: &mut impl Rng,
    ) -> Result<(RasterImage, Option<LabelMap>)> {
        let (mut img, mut labels) = if self.flip_horizontal {
            let (i, l) = flip_horizontal(img, labels);
            (i, l)
        } else {
            (img.clone(), labels.cloned())
        };
        if self.crop_fraction < 1.0 {
            let (i, l) = center_crop(&img, labels.as_ref(), self.crop_fraction)?;
            img = i;
            labels = l;
        }
        if self.noise_sigma > 0.0 {
            img = add_noise(&img, self.noise_sigma, rng)?;
        }
        if self.blur_sigma > 0.0 {
            img = blur(&img, self.blur_sigma)?;
        }
        Ok((img, labels))
    }
}

/// 256-entry table for `O = I^(1/gamma)`: entry `k` is
/// `round(255 * (k/255)^(1/gamma))`. Monotone, with 0 and 255 fixed.
pub fn gamma_lut(gamma: f64) -> Result<[u8; 256]> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParam(format!(
            "gamma must be positive and finite, got {gamma}"
        )));
    }
    let inv = 1.0 / gamma;
    let mut lut = [0u8; 256];
    for (k, entry) in lut.iter_mut().enumerate() {
        *entry = round_half_up_u8(255.0 * (k as f64 / 255.0).powf(inv));
    }
    Ok(lut)
}

/// Gamma-correct every channel of every pixel through [`gamma_lut`].
pub fn apply_gamma(img: &RasterImage, gamma: f64) -> Result<RasterImage> {
    let lut = gamma_lut(gamma)?;
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = lut[*v as usize];
    }
    Ok(out)
}

/// Draw a gamma exponent from the truncated policy distribution.
///
/// Rejection sampling: normal draws are repeated until one lands in
/// `(0, 3]`. `sigma == 0` short-circuits to `mu` without consuming the
/// stream. Identical stream state always yields the identical value.
pub fn sample_gamma(policy: &GammaPolicy, rng: &mut impl Rng) -> f64 {
    if policy.sigma == 0.0 {
        return policy.mu;
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let g = policy.mu + policy.sigma * z;
        if g > GAMMA_LOWER && g <= GAMMA_UPPER {
            return g;
        }
    }
}

/// Mirror columns: column `i` swaps with column `w-1-i` in both rasters.
pub fn flip_horizontal(
    img: &RasterImage,
    labels: Option<&LabelMap>,
) -> (RasterImage, Option<LabelMap>) {
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(x, y, img.pixel(w - 1 - x, y));
        }
    }
    let out_labels = labels.map(|l| {
        let mut m = l.clone();
        for y in 0..l.height() {
            for x in 0..l.width() {
                m.set(x, y, l.get(l.width() - 1 - x, y));
            }
        }
        m
    });
    (out, out_labels)
}

/// Inverse map for crop-then-resize-back: the central
/// `round(f*w) x round(f*h)` window stretched to the full canvas with
/// corner-aligned sampling.
fn crop_map(width: u32, height: u32, fraction: f64) -> Result<InverseMap> {
    let cw = (fraction * width as f64).round() as u32;
    let ch = (fraction * height as f64).round() as u32;
    if cw == 0 || ch == 0 {
        return Err(Error::InvalidParam(format!(
            "crop fraction {fraction} leaves an empty window on {width}x{height}"
        )));
    }
    let x0 = (width - cw) / 2;
    let y0 = (height - ch) / 2;
    let sx = if width > 1 {
        (cw - 1) as f64 / (width - 1) as f64
    } else {
        0.0
    };
    let sy = if height > 1 {
        (ch - 1) as f64 / (height - 1) as f64
    } else {
        0.0
    };
    InverseMap::from_fn(width, height, |x, y| {
        Some((x0 as f64 + x as f64 * sx, y0 as f64 + y as f64 * sy))
    })
}

/// Extract the central window of the given fraction and resize it back to
/// the original dimensions (bilinear for the image, nearest for labels).
pub fn center_crop(
    img: &RasterImage,
    labels: Option<&LabelMap>,
    fraction: f64,
) -> Result<(RasterImage, Option<LabelMap>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "crop fraction must be in (0, 1], got {fraction}"
        )));
    }
    let map = crop_map(img.width(), img.height(), fraction)?;
    let (out, _) = remap_image(img, &map, [0, 0, 0])?;
    let out_labels = match labels {
        Some(l) => {
            if l.width() != img.width() || l.height() != img.height() {
                return Err(Error::DimensionMismatch(format!(
                    "labels are {}x{} but image is {}x{}",
                    l.width(),
                    l.height(),
                    img.width(),
                    img.height()
                )));
            }
            Some(remap_labels(l, &map)?.0)
        }
        None => None,
    };
    Ok((out, out_labels))
}

/// Additive Gaussian noise: each channel sample gets
/// `round(N(0, sigma^2))`, clamped to `[0, 255]`. `sigma == 0` is the
/// identity and consumes no stream.
pub fn add_noise(img: &RasterImage, sigma: f64, rng: &mut impl Rng) -> Result<RasterImage> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidParam(format!(
            "noise sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated above");
    let mut out = img.clone();
    for v in out.data_mut() {
        let delta = normal.sample(rng).round();
        *v = (*v as f64 + delta).clamp(0.0, 255.0) as u8;
    }
    Ok(out)
}

/// Separable Gaussian blur with kernel radius `ceil(3*sigma)` and
/// clamp-to-edge handling. Accumulates in f64 and rounds once, so the
/// impulse response is the quantized 2D kernel exactly. `sigma == 0` is
/// the identity.
pub fn blur(img: &RasterImage, sigma: f64) -> Result<RasterImage> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidParam(format!(
            "blur sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for i in -radius..=radius {
        kernel.push((-((i * i) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= norm;
    }

    let (w, h) = (img.width() as i64, img.height() as i64);
    let idx = |x: i64, y: i64, c: usize| (y * w + x) as usize * 3 + c;

    // Horizontal pass into f64.
    let mut mid = vec![0.0f64; (w * h) as usize * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sx = (x + ki as i64 - radius).clamp(0, w - 1);
                    acc += k * img.data()[idx(sx, y, c)] as f64;
                }
                mid[idx(x, y, c)] = acc;
            }
        }
    }
    // Vertical pass with final rounding.
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sy = (y + ki as i64 - radius).clamp(0, h - 1);
                    acc += k * mid[idx(x, sy, c)];
                }
                out.data_mut()[idx(x, y, c)] = round_half_up_u8(acc);
            }
        }
    }
    Ok(out)
}
