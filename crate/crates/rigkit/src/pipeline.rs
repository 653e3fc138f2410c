//! Batch orchestration: manifests, augmentation policies, deterministic
//! seeding, stitching and evaluation runs, montage previews.
//!
//! Determinism contract: a run is fully described by (manifest, policy,
//! master seed). Every work item (record x copy) derives its own RNG
//! streams through [`derive_stream_seed`], so neither worker count nor
//! scheduling order can change a single sampled value, and output trees
//! are byte-identical across runs.
//!
//! File formats are plain text: manifests are one `image_path[,label_path]`
//! record per line; policies, rigs and class tables are TOML (see the
//! respective modules). Augmented outputs are named
//! `<stem>__c<copy>__<stepsig>.png` so a training set's provenance can be
//! read off its filenames.

use rayon::prelude::*;
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::{undistort_full_frame, undistort_full_frame_labels};
use crate::error::{Error, Result};
use crate::eval::{metrics, ClassTable, ConfusionMatrix, Metrics, RemapTable};
use crate::homography::{skew_warp, SkewSide, SkewSpec};
use crate::pano::{
    stitch, stitch_labels, CameraFrame, CameraPose, CylindricalCanvas, LabelFrame, Rig,
};
use crate::photo::{
    add_noise, apply_gamma, blur, center_crop, flip_horizontal, sample_gamma, GammaPolicy,
};
use crate::raster::{
    load_image, load_labels, save_image, save_labels, save_mask, LabelMap, RasterImage,
};

/// One dataset entry: an image and optionally its label map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub image: PathBuf,
    pub labels: Option<PathBuf>,
}

/// Ordered list of dataset entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    /// Parse manifest text: one `image_path[,label_path]` per line. Blank
    /// lines and lines starting with `#` are skipped.
    pub fn from_str(text: &str, origin: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (image, labels) = match line.split_once(',') {
                Some((img, lbl)) => (img.trim(), Some(lbl.trim())),
                None => (line, None),
            };
            if image.is_empty() || labels == Some("") {
                return Err(Error::config(
                    origin,
                    format!("line {}: empty path", lineno + 1),
                ));
            }
            records.push(ManifestRecord {
                image: PathBuf::from(image),
                labels: labels.map(PathBuf::from),
            });
        }
        if records.is_empty() {
            return Err(Error::config(origin, "manifest has no records"));
        }
        Ok(Self { records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str(&text, path)
    }
}

/// Skew magnitude: one fixed angle, or a sweep that multiplies the
/// emitted variants (one per angle).
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSpec {
    Fixed(f64),
    Sweep(Vec<f64>),
}

impl AlphaSpec {
    fn angles(&self) -> &[f64] {
        match self {
            AlphaSpec::Fixed(a) => std::slice::from_ref(a),
            AlphaSpec::Sweep(v) => v,
        }
    }
}

/// One augmentation step of a policy, in application order.
#[derive(Debug, Clone, PartialEq)]
pub enum AugStep {
    Skew { side: SkewSide, alpha: AlphaSpec },
    Gamma(GammaPolicy),
    Flip,
    Crop { fraction: f64 },
    Noise { sigma: f64 },
    Blur { sigma: f64 },
}

/// An augmentation recipe: ordered steps, number of copies per source
/// record, and the master seed all stream seeds derive from.
#[derive(Debug, Clone, PartialEq)]
pub struct AugPolicy {
    pub steps: Vec<AugStep>,
    pub copies_per_source: u32,
    pub master_seed: u64,
}

impl AugPolicy {
    pub fn new(steps: Vec<AugStep>, copies_per_source: u32, master_seed: u64) -> Result<Self> {
        if copies_per_source == 0 {
            return Err(Error::InvalidParam("copies_per_source must be >= 1".into()));
        }
        if steps.is_empty() && copies_per_source > 1 {
            return Err(Error::InvalidParam(
                "an empty policy with copies_per_source > 1 would emit duplicates".into(),
            ));
        }
        for step in &steps {
            match step {
                AugStep::Skew { alpha, .. } => {
                    if alpha.angles().is_empty() {
                        return Err(Error::InvalidParam("skew step with no angles".into()));
                    }
                    for &a in alpha.angles() {
                        if !(10.0..=70.0).contains(&a) {
                            return Err(Error::InvalidParam(format!(
                                "skew alpha must be in [10, 70] degrees, got {a}"
                            )));
                        }
                    }
                }
                AugStep::Gamma(p) => {
                    GammaPolicy::new(p.mu, p.sigma)?;
                }
                AugStep::Crop { fraction } => {
                    if !(*fraction > 0.0 && *fraction <= 1.0) {
                        return Err(Error::InvalidParam(format!(
                            "crop fraction must be in (0, 1], got {fraction}"
                        )));
                    }
                }
                AugStep::Noise { sigma } | AugStep::Blur { sigma } => {
                    if !sigma.is_finite() || *sigma < 0.0 {
                        return Err(Error::InvalidParam(format!(
                            "sigma must be finite and non-negative, got {sigma}"
                        )));
                    }
                }
                AugStep::Flip => {}
            }
        }
        Ok(Self {
            steps,
            copies_per_source,
            master_seed,
        })
    }

    /// Parse a policy file:
    ///
    /// ```toml
    /// copies_per_source = 2
    /// master_seed = 7   # optional, usually overridden on the command line
    ///
    /// [[steps]]
    /// skew = { side = "left", alpha_deg = 30.0 }   # or alpha_deg = [10.0, 20.0]
    ///
    /// [[steps]]
    /// gamma = { mu = 1.0, sigma = 0.5 }
    ///
    /// [[steps]]
    /// flip = true
    ///
    /// [[steps]]
    /// crop = { fraction = 0.9 }
    ///
    /// [[steps]]
    /// noise = { sigma = 5.0 }
    ///
    /// [[steps]]
    /// blur = { sigma = 1.5 }
    /// ```
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum RawAlpha {
            Fixed(f64),
            Sweep(Vec<f64>),
        }
        #[derive(Deserialize)]
        struct RawSkew {
            side: SkewSide,
            alpha_deg: RawAlpha,
        }
        #[derive(Deserialize)]
        struct RawGamma {
            mu: f64,
            sigma: f64,
        }
        #[derive(Deserialize)]
        struct RawFraction {
            fraction: f64,
        }
        #[derive(Deserialize)]
        struct RawSigma {
            sigma: f64,
        }
        #[derive(Deserialize, Default)]
        struct RawStep {
            skew: Option<RawSkew>,
            gamma: Option<RawGamma>,
            flip: Option<bool>,
            crop: Option<RawFraction>,
            noise: Option<RawSigma>,
            blur: Option<RawSigma>,
        }
        #[derive(Deserialize)]
        struct RawPolicy {
            copies_per_source: Option<u32>,
            master_seed: Option<u64>,
            #[serde(default)]
            steps: Vec<RawStep>,
        }

        let raw: RawPolicy =
            toml::from_str(text).map_err(|e| Error::config(origin, e.to_string()))?;
        let mut steps = Vec::with_capacity(raw.steps.len());
        for (i, s) in raw.steps.into_iter().enumerate() {
            let mut parsed = Vec::new();
            if let Some(skew) = s.skew {
                parsed.push(AugStep::Skew {
                    side: skew.side,
                    alpha: match skew.alpha_deg {
                        RawAlpha::Fixed(a) => AlphaSpec::Fixed(a),
                        RawAlpha::Sweep(v) => AlphaSpec::Sweep(v),
                    },
                });
            }
            if let Some(g) = s.gamma {
                parsed.push(AugStep::Gamma(
                    GammaPolicy::new(g.mu, g.sigma).map_err(|e| Error::config(origin, e.to_string()))?,
                ));
            }
            if let Some(f) = s.flip {
                if f {
                    parsed.push(AugStep::Flip);
                } else {
                    return Err(Error::config(
                        origin,
                        format!("step {}: 'flip = false' is meaningless, drop the step", i + 1),
                    ));
                }
            }
            if let Some(c) = s.crop {
                parsed.push(AugStep::Crop {
                    fraction: c.fraction,
                });
            }
            if let Some(n) = s.noise {
                parsed.push(AugStep::Noise { sigma: n.sigma });
            }
            if let Some(b) = s.blur {
                parsed.push(AugStep::Blur { sigma: b.sigma });
            }
            match parsed.len() {
                1 => steps.push(parsed.pop().unwrap()),
                0 => {
                    return Err(Error::config(
                        origin,
                        format!("step {} declares no augmentation", i + 1),
                    ))
                }
                _ => {
                    return Err(Error::config(
                        origin,
                        format!("step {} declares more than one augmentation", i + 1),
                    ))
                }
            }
        }
        AugPolicy::new(
            steps,
            raw.copies_per_source.unwrap_or(1),
            raw.master_seed.unwrap_or(0),
        )
        .map_err(|e| Error::config(origin, e.to_string()))
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

#[inline]
fn splitmix_mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the RNG seed of one augmentation step on one work item.
///
/// Four rounds of the splitmix64 finalizer, absorbing master seed, record,
/// copy and step index in turn. Distinct tuples collide only with
/// birthday-bound probability, and the result cannot depend on worker
/// scheduling.
pub fn derive_stream_seed(
    master_seed: u64,
    record_index: u64,
    copy_index: u64,
    step_index: u64,
) -> u64 {
    let mut h = splitmix_mix(master_seed);
    h = splitmix_mix(h ^ record_index);
    h = splitmix_mix(h ^ copy_index);
    h = splitmix_mix(h ^ step_index);
    h
}

/// A concrete (sweep-resolved) step together with its policy position,
/// which pins its seed.
#[derive(Debug, Clone)]
struct PlannedStep {
    policy_index: usize,
    step: AugStep,
}

/// One resolved variant of the policy: a straight-line list of steps.
#[derive(Debug, Clone)]
struct Variant {
    steps: Vec<PlannedStep>,
}

/// Resolve sweeps into the cross product of their angles, in policy order.
fn expand_variants(policy: &AugPolicy) -> Vec<Variant> {
    let mut variants = vec![Variant { steps: Vec::new() }];
    for (policy_index, step) in policy.steps.iter().enumerate() {
        match step {
            AugStep::Skew { side, alpha } => {
                let mut next = Vec::with_capacity(variants.len() * alpha.angles().len());
                for variant in &variants {
                    for &a in alpha.angles() {
                        let mut v = variant.clone();
                        v.steps.push(PlannedStep {
                            policy_index,
                            step: AugStep::Skew {
                                side: *side,
                                alpha: AlphaSpec::Fixed(a),
                            },
                        });
                        next.push(v);
                    }
                }
                variants = next;
            }
            other => {
                for v in &mut variants {
                    v.steps.push(PlannedStep {
                        policy_index,
                        step: other.clone(),
                    });
                }
            }
        }
    }
    variants
}

/// Outcome of an augmentation run.
#[derive(Debug, Clone)]
pub struct AugmentSummary {
    /// Image files written (labels not counted).
    pub written: usize,
    /// Records skipped with the reason, e.g. unreadable input.
    pub skipped: Vec<String>,
    /// Path of the run log.
    pub log_path: PathBuf,
}

struct ItemOutput {
    record: usize,
    copy: u32,
    variant: usize,
    log_line: String,
}

/// Execute a policy over a manifest. For each record x copy x variant the
/// steps run in policy order; geometric steps transform image and labels
/// jointly, photometric steps transform the image only. Outputs land in
/// `out_dir` as `<stem>__c<copy>__<stepsig>.png` (labels alongside with
/// an extra `_labels` suffix); a log records every sampled parameter.
///
/// Byte-identical output trees are guaranteed for a fixed
/// (manifest, policy, master seed) regardless of `workers`.
pub fn run_augment(
    manifest: &Manifest,
    policy: &AugPolicy,
    out_dir: impl AsRef<Path>,
    workers: Option<usize>,
) -> Result<AugmentSummary> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    // Output names are stem-based; duplicate stems would make items
    // overwrite each other and break determinism.
    {
        let mut stems: Vec<&std::ffi::OsStr> = manifest
            .records
            .iter()
            .filter_map(|r| r.image.file_stem())
            .collect();
        stems.sort();
        for pair in stems.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::InvalidParam(format!(
                    "duplicate image stem '{}' in manifest; output names would collide",
                    pair[0].to_string_lossy()
                )));
            }
        }
    }

    let variants = expand_variants(policy);
    let mut items = Vec::new();
    for record in 0..manifest.records.len() {
        for copy in 0..policy.copies_per_source {
            for variant in 0..variants.len() {
                items.push((record, copy, variant));
            }
        }
    }

    let work = |(record, copy, variant): (usize, u32, usize)| -> Result<std::result::Result<ItemOutput, String>> {
        let rec = &manifest.records[record];
        let stem = rec
            .image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("record{record}"));

        let mut img = match load_image(&rec.image) {
            Ok(img) => img,
            Err(e) => return Ok(Err(format!("record {record}: {e}"))),
        };
        let mut labels = match &rec.labels {
            Some(path) => match load_labels(path) {
                Ok(l) => Some(l),
                Err(e) => return Ok(Err(format!("record {record}: {e}"))),
            },
            None => None,
        };

        let mut sig_parts: Vec<String> = Vec::new();
        let mut params = String::new();
        for planned in &variants[variant].steps {
            let seed = derive_stream_seed(
                policy.master_seed,
                record as u64,
                copy as u64,
                planned.policy_index as u64,
            );
            match &planned.step {
                AugStep::Skew { side, alpha } => {
                    let a = alpha.angles()[0];
                    let spec = match SkewSpec::new(*side, a, img.width(), img.height()) {
                        Ok(s) => s,
                        Err(e) => return Ok(Err(format!("record {record}: {e}"))),
                    };
                    let (i, l, _) = match skew_warp(&img, labels.as_ref(), &spec) {
                        Ok(r) => r,
                        Err(e) => return Ok(Err(format!("record {record}: {e}"))),
                    };
                    img = i;
                    labels = l;
                    sig_parts.push(format!("skew{}{}", side.tag(), a));
                    let _ = write!(params, " skew.alpha={a}");
                }
                AugStep::Gamma(gp) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let g = sample_gamma(gp, &mut rng);
                    img = apply_gamma(&img, g)?;
                    sig_parts.push(format!("g{g:.2}"));
                    let _ = write!(params, " gamma.value={g:?}");
                }
                AugStep::Flip => {
                    let (i, l) = flip_horizontal(&img, labels.as_ref());
                    img = i;
                    labels = l;
                    sig_parts.push("flip".into());
                }
                AugStep::Crop { fraction } => {
                    let (i, l) = match center_crop(&img, labels.as_ref(), *fraction) {
                        Ok(r) => r,
                        Err(e) => return Ok(Err(format!("record {record}: {e}"))),
                    };
                    img = i;
                    labels = l;
                    sig_parts.push(format!("crop{fraction}"));
                }
                AugStep::Noise { sigma } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    img = add_noise(&img, *sigma, &mut rng)?;
                    sig_parts.push(format!("n{sigma}"));
                }
                AugStep::Blur { sigma } => {
                    img = blur(&img, *sigma)?;
                    sig_parts.push(format!("b{sigma}"));
                }
            }
        }

        let sig = if sig_parts.is_empty() {
            "orig".to_string()
        } else {
            sig_parts.join("-")
        };
        let name = format!("{stem}__c{copy}__{sig}.png");
        save_image(&img, out_dir.join(&name))?;
        if let Some(l) = &labels {
            save_labels(l, out_dir.join(format!("{stem}__c{copy}__{sig}_labels.png")))?;
        }
        Ok(Ok(ItemOutput {
            record,
            copy,
            variant,
            log_line: format!("record={record} copy={copy} out={name}{params}"),
        }))
    };

    let results: Vec<Result<std::result::Result<ItemOutput, String>>> = match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;
            pool.install(|| items.par_iter().map(|&item| work(item)).collect())
        }
        None => items.par_iter().map(|&item| work(item)).collect(),
    };

    let mut outputs = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r? {
            Ok(out) => outputs.push(out),
            Err(reason) => skipped.push(reason),
        }
    }
    skipped.sort();
    skipped.dedup();
    outputs.sort_by_key(|o| (o.record, o.copy, o.variant));

    let log_path = out_dir.join("augment_log.txt");
    let mut log = String::new();
    for o in &outputs {
        log.push_str(&o.log_line);
        log.push('\n');
    }
    std::fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;

    Ok(AugmentSummary {
        written: outputs.len(),
        skipped,
        log_path,
    })
}

/// Undistort one named rig camera's frame and write image plus mask.
pub fn run_undistort(
    rig_path: impl AsRef<Path>,
    camera_id: &str,
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    mask_path: impl AsRef<Path>,
) -> Result<crate::camera::Intrinsics> {
    let rig = Rig::load(rig_path)?;
    let cam = rig.camera(camera_id).ok_or_else(|| {
        Error::RigMismatch(format!("rig has no camera with id '{camera_id}'"))
    })?;
    let img = load_image(input)?;
    let (out, mask, intr) = undistort_full_frame(&img, &cam.intrinsics, &cam.distortion)?;
    save_image(&out, output)?;
    save_mask(&mask, mask_path)?;
    Ok(intr)
}

/// Files written by a stitch run.
#[derive(Debug, Clone)]
pub struct StitchSummary {
    pub panorama: PathBuf,
    pub mask: PathBuf,
    pub contributions: Vec<PathBuf>,
    pub labels: Option<PathBuf>,
    pub canvas_size: (u32, u32),
    /// Mask-true azimuth span in degrees, inclusive of column extent.
    pub theta_span_deg: f64,
}

/// Undistort the three frames with their rig cameras (in rig order:
/// left, front, right), reproject onto the cylinder and composite.
/// Writes `<prefix>.png`, `<prefix>_mask.png`, one
/// `<prefix>_contrib_<id>.png` per camera and, when label frames are
/// given, `<prefix>_labels.png` through the identical winner map.
pub fn run_stitch(
    rig_path: impl AsRef<Path>,
    frame_paths: &[PathBuf; 3],
    out_prefix: &str,
    label_paths: Option<&[PathBuf; 3]>,
) -> Result<StitchSummary> {
    let rig = Rig::load(rig_path)?;
    if rig.cameras.len() != 3 {
        return Err(Error::RigMismatch(format!(
            "stitch expects a 3-camera rig, this one has {}",
            rig.cameras.len()
        )));
    }

    let mut undistorted = Vec::with_capacity(3);
    for (cam, path) in rig.cameras.iter().zip(frame_paths) {
        let img = load_image(path)?;
        let (uimg, umask, uintr) = undistort_full_frame(&img, &cam.intrinsics, &cam.distortion)?;
        undistorted.push((
            CameraPose {
                intrinsics: uintr,
                extrinsics: cam.extrinsics,
            },
            uimg,
            umask,
        ));
    }
    let poses: Vec<CameraPose> = undistorted.iter().map(|(p, _, _)| *p).collect();
    let canvas = CylindricalCanvas::from_poses(&poses, rig.pixels_per_radian)?;

    let frames: Vec<CameraFrame<'_>> = undistorted
        .iter()
        .map(|(pose, img, mask)| CameraFrame {
            pose: *pose,
            image: img,
            mask,
        })
        .collect();
    let out = stitch(&frames, &canvas)?;

    if let Some(parent) = Path::new(out_prefix).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let panorama = PathBuf::from(format!("{out_prefix}.png"));
    let mask_file = PathBuf::from(format!("{out_prefix}_mask.png"));
    save_image(&out.image, &panorama)?;
    save_mask(&out.mask, &mask_file)?;
    let mut contributions = Vec::with_capacity(3);
    for (cam, contrib) in rig.cameras.iter().zip(&out.contributions) {
        let p = PathBuf::from(format!("{out_prefix}_contrib_{}.png", cam.id));
        save_mask(contrib, &p)?;
        contributions.push(p);
    }

    let labels_file = match label_paths {
        Some(paths) => {
            let mut frames = Vec::with_capacity(3);
            for (cam, path) in rig.cameras.iter().zip(paths) {
                let labels = load_labels(path)?;
                let (ulabels, umask, uintr) =
                    undistort_full_frame_labels(&labels, &cam.intrinsics, &cam.distortion)?;
                frames.push((
                    CameraPose {
                        intrinsics: uintr,
                        extrinsics: cam.extrinsics,
                    },
                    ulabels,
                    umask,
                ));
            }
            let label_frames: Vec<LabelFrame<'_>> = frames
                .iter()
                .map(|(pose, labels, mask)| LabelFrame {
                    pose: *pose,
                    labels,
                    mask,
                })
                .collect();
            let stitched = stitch_labels(&label_frames, &canvas)?;
            let p = PathBuf::from(format!("{out_prefix}_labels.png"));
            save_labels(&stitched.labels, &p)?;
            Some(p)
        }
        None => None,
    };

    // Inclusive azimuth extent of mask-true columns.
    let mut first = None;
    let mut last = None;
    for u in 0..canvas.width() {
        if (0..canvas.height()).any(|v| out.mask.get(u, v)) {
            if first.is_none() {
                first = Some(u);
            }
            last = Some(u);
        }
    }
    let theta_span_deg = match (first, last) {
        (Some(f), Some(l)) => {
            ((l - f + 1) as f64 / canvas.pixels_per_radian()).to_degrees()
        }
        _ => 0.0,
    };

    Ok(StitchSummary {
        panorama,
        mask: mask_file,
        contributions,
        labels: labels_file,
        canvas_size: (canvas.width(), canvas.height()),
        theta_span_deg,
    })
}

/// Outcome of an evaluation run.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub metrics: Metrics,
    /// Aligned human-readable table.
    pub text: String,
    /// Machine-readable key=value records.
    pub records: String,
    pub pairs: usize,
    pub skipped: Vec<String>,
}

/// Score every PNG in `gt_dir` against the same-named file in `pred_dir`.
/// An optional remap folds both sides before counting. Pairs with missing
/// counterparts, unreadable files or mismatched dimensions are skipped and
/// reported.
pub fn run_evaluate(
    gt_dir: impl AsRef<Path>,
    pred_dir: impl AsRef<Path>,
    class_path: impl AsRef<Path>,
    remap_path: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<EvalReport> {
    let gt_dir = gt_dir.as_ref();
    let pred_dir = pred_dir.as_ref();
    let table = ClassTable::load(class_path)?;
    let remap = remap_path.map(RemapTable::load).transpose()?;

    let mut names: Vec<String> = std::fs::read_dir(gt_dir)
        .map_err(|e| Error::io(gt_dir, e))?
        .filter_map(|entry| entry.ok())
        .filter_map(|entry| {
            let name = entry.file_name().to_string_lossy().into_owned();
            name.ends_with(".png").then_some(name)
        })
        .collect();
    names.sort();

    let mut cm = ConfusionMatrix::new(table.len())?;
    let mut skipped = Vec::new();
    let mut pairs = 0usize;
    for name in &names {
        let pred_path = pred_dir.join(name);
        if !pred_path.exists() {
            skipped.push(format!("{name}: no prediction file"));
            continue;
        }
        let pair = (|| -> Result<(LabelMap, LabelMap)> {
            let gt = load_labels(gt_dir.join(name))?.with_ignore_value(table.ignore());
            let pred = load_labels(&pred_path)?.with_ignore_value(table.ignore());
            match &remap {
                Some(t) => Ok((
                    crate::eval::remap_labels(&gt, t)?,
                    crate::eval::remap_labels(&pred, t)?,
                )),
                None => Ok((gt, pred)),
            }
        })();
        let (gt, pred) = match pair {
            Ok(p) => p,
            Err(e) => {
                skipped.push(format!("{name}: {e}"));
                continue;
            }
        };
        if let Err(e) = cm.accumulate(&gt, &pred) {
            skipped.push(format!("{name}: {e}"));
            continue;
        }
        pairs += 1;
    }

    if pairs == 0 {
        return Err(Error::InvalidParam(format!(
            "no usable ground-truth/prediction pairs between {} and {}",
            gt_dir.display(),
            pred_dir.display()
        )));
    }
    let m = metrics(&cm)?;
    let text = m.render_text(&table);
    let records = m.render_records(&table);
    if let Some(path) = report_path {
        std::fs::write(path, &records).map_err(|e| Error::io(path, e))?;
    }
    Ok(EvalReport {
        metrics: m,
        text,
        records,
        pairs,
        skipped,
    })
}

/// Width of the gap between montage tiles, in pixels.
const PREVIEW_SEPARATOR: u32 = 2;

/// Tile images left-to-right, top-to-bottom at native resolution with
/// 2-px separators. A single image comes back as an exact copy.
pub fn make_preview(inputs: &[RasterImage], columns: usize) -> Result<RasterImage> {
    if inputs.is_empty() {
        return Err(Error::InvalidParam("preview needs at least one image".into()));
    }
    if columns == 0 {
        return Err(Error::InvalidParam("preview needs at least one column".into()));
    }
    if inputs.len() == 1 {
        return Ok(inputs[0].clone());
    }
    let rows: Vec<&[RasterImage]> = inputs.chunks(columns).collect();
    let width = rows
        .iter()
        .map(|row| {
            row.iter().map(|i| i.width()).sum::<u32>()
                + PREVIEW_SEPARATOR * (row.len() as u32 - 1)
        })
        .max()
        .unwrap();
    let height = rows
        .iter()
        .map(|row| row.iter().map(|i| i.height()).max().unwrap())
        .sum::<u32>()
        + PREVIEW_SEPARATOR * (rows.len() as u32 - 1);

    let mut out = RasterImage::new(width, height)?;
    let mut y0 = 0u32;
    for row in &rows {
        let row_h = row.iter().map(|i| i.height()).max().unwrap();
        let mut x0 = 0u32;
        for img in row.iter() {
            for y in 0..img.height() {
                for x in 0..img.width() {
                    out.set_pixel(x0 + x, y0 + y, img.pixel(x, y));
                }
            }
            x0 += img.width() + PREVIEW_SEPARATOR;
        }
        y0 += row_h + PREVIEW_SEPARATOR;
    }
    Ok(out)
}

/// Load images, tile them, write the montage.
pub fn run_preview(
    inputs: &[PathBuf],
    out_path: impl AsRef<Path>,
    columns: usize,
) -> Result<()> {
    let images: Result<Vec<RasterImage>> = inputs.iter().map(load_image).collect();
    let montage = make_preview(&images?, columns)?;
    save_image(&montage, out_path)
}
