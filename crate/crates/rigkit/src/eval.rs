//! Segmentation scoring: class remapping and the three summary metrics.
//!
//! Predictions and ground truth meet in a KxK [`ConfusionMatrix`] of pixel
//! counts `n[gt][pred]`, from which the metrics derive:
//!
//! * global accuracy `G` = trace / total,
//! * per-class accuracy `C` = mean of `n[g][g] / t_g` over classes that
//!   occur in the ground truth,
//! * `mIoU` = mean of `n[g][g] / (t_g + p_g - n[g][g])` over classes that
//!   occur on either side.
//!
//! Pixels whose ground truth *or* prediction carries the ignore value are
//! excluded from every count, so warp padding never distorts a score.
//! Accumulation is plain addition: workers can fill private matrices and
//! merge them in any order.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::LabelMap;

/// Ordered class names; ids are their positions. `ignore` is excluded
/// from all counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTable {
    names: Vec<String>,
    ignore: u8,
}

impl ClassTable {
    pub fn new(names: Vec<String>, ignore: u8) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidParam("class table has no classes".into()));
        }
        if names.len() > 255 {
            return Err(Error::InvalidParam(format!(
                "at most 255 classes supported, got {}",
                names.len()
            )));
        }
        if (ignore as usize) < names.len() {
            return Err(Error::InvalidParam(format!(
                "ignore value {ignore} collides with class ids 0..{}",
                names.len() - 1
            )));
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::InvalidParam("class names are not unique".into()));
        }
        Ok(Self { names, ignore })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ignore(&self) -> u8 {
        self.ignore
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    /// Parse a class table file. Expected keys:
    ///
    /// ```toml
    /// ignore = 255
    /// classes = [ { id = 0, name = "Sky" }, { id = 1, name = "Road" } ]
    /// ```
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct ClassEntry {
            id: u8,
            name: String,
        }
        #[derive(serde::Deserialize)]
        struct ClassFile {
            ignore: Option<u8>,
            classes: Vec<ClassEntry>,
        }
        let file: ClassFile =
            toml::from_str(text).map_err(|e| Error::config(origin, e.to_string()))?;
        for (i, entry) in file.classes.iter().enumerate() {
            if entry.id as usize != i {
                return Err(Error::config(
                    origin,
                    format!(
                        "class ids must be dense from 0; position {i} declares id {}",
                        entry.id
                    ),
                ));
            }
        }
        ClassTable::new(
            file.classes.into_iter().map(|c| c.name).collect(),
            file.ignore.unwrap_or(crate::raster::DEFAULT_IGNORE),
        )
        .map_err(|e| Error::config(origin, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }
}

/// Total mapping from source class ids `0..S-1` to destination ids or
/// ignore, as used to fold a richer labeling into a coarser one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemapTable {
    // One entry per source id; None maps to ignore.
    targets: Vec<Option<u8>>,
}

impl RemapTable {
    /// `targets[s]` is the destination id of source id `s`, or None for
    /// ignore.
    pub fn new(targets: Vec<Option<u8>>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidParam("remap table has no entries".into()));
        }
        Ok(Self { targets })
    }

    pub fn source_len(&self) -> usize {
        self.targets.len()
    }

    /// Parse a remap file. `to` values equal to `ignore` map to ignore:
    ///
    /// ```toml
    /// ignore = 255
    /// remap = [ { from = 0, to = 0 }, { from = 1, to = 0 }, { from = 2, to = 255 } ]
    /// ```
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct RemapEntry {
            from: u8,
            to: u8,
        }
        #[derive(serde::Deserialize)]
        struct RemapFile {
            ignore: Option<u8>,
            remap: Vec<RemapEntry>,
        }
        let file: RemapFile =
            toml::from_str(text).map_err(|e| Error::config(origin, e.to_string()))?;
        let ignore = file.ignore.unwrap_or(crate::raster::DEFAULT_IGNORE);
        let mut targets = vec![None; file.remap.len()];
        let mut seen = vec![false; file.remap.len()];
        for entry in &file.remap {
            let from = entry.from as usize;
            if from >= targets.len() {
                return Err(Error::config(
                    origin,
                    format!(
                        "source ids must be dense 0..{}; found {from}",
                        targets.len() - 1
                    ),
                ));
            }
            if seen[from] {
                return Err(Error::config(
                    origin,
                    format!("source id {from} mapped twice"),
                ));
            }
            seen[from] = true;
            targets[from] = if entry.to == ignore {
                None
            } else {
                Some(entry.to)
            };
        }
        RemapTable::new(targets).map_err(|e| Error::config(origin, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }
}

/// Pointwise class substitution; the ignore value passes through.
/// Non-ignore values at or beyond the table's source range are an error.
pub fn remap_labels(map: &LabelMap, table: &RemapTable) -> Result<LabelMap> {
    let ignore = map.ignore_value();
    let mut out = map.clone();
    for v in out.data_mut() {
        if *v == ignore {
            continue;
        }
        let slot = table
            .targets
            .get(*v as usize)
            .ok_or(Error::ClassOutOfRange {
                id: *v,
                count: table.targets.len(),
            })?;
        *v = slot.unwrap_or(ignore);
    }
    Ok(out)
}

/// KxK table of pixel counts, ground truth on rows, prediction on columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes == 0 || num_classes > 255 {
            return Err(Error::InvalidParam(format!(
                "confusion matrix needs 1..=255 classes, got {num_classes}"
            )));
        }
        Ok(Self {
            k: num_classes,
            counts: vec![0; num_classes * num_classes],
        })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Ground-truth row total `t_g`.
    pub fn gt_total(&self, g: usize) -> u64 {
        self.counts[g * self.k..(g + 1) * self.k].iter().sum()
    }

    /// Prediction column total `p_c`.
    pub fn pred_total(&self, c: usize) -> u64 {
        (0..self.k).map(|g| self.count(g, c)).sum()
    }

    /// Count one image pair. Pixels where either side is ignore contribute
    /// nothing; other values must be below the class count.
    pub fn accumulate(&mut self, gt: &LabelMap, pred: &LabelMap) -> Result<()> {
        if gt.width() != pred.width() || gt.height() != pred.height() {
            return Err(Error::DimensionMismatch(format!(
                "ground truth {}x{} vs prediction {}x{}",
                gt.width(),
                gt.height(),
                pred.width(),
                pred.height()
            )));
        }
        for (&g, &p) in gt.data().iter().zip(pred.data()) {
            if g == gt.ignore_value() || p == pred.ignore_value() {
                continue;
            }
            if g as usize >= self.k {
                return Err(Error::ClassOutOfRange { id: g, count: self.k });
            }
            if p as usize >= self.k {
                return Err(Error::ClassOutOfRange { id: p, count: self.k });
            }
            self.counts[g as usize * self.k + p as usize] += 1;
        }
        Ok(())
    }

    /// Merge another matrix by addition (for parallel accumulation).
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.k != other.k {
            return Err(Error::DimensionMismatch(format!(
                "merging {}-class into {}-class matrix",
                other.k, self.k
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// The metric bundle computed from one confusion matrix. Percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Recall per class, None where the class is absent from ground truth.
    pub per_class_acc: Vec<Option<f64>>,
    /// IoU per class, None where the class is absent from both sides.
    pub per_class_iou: Vec<Option<f64>>,
    /// Mean per-class accuracy over present classes (C).
    pub class_acc: f64,
    /// Mean IoU over classes present on either side.
    pub miou: f64,
    /// Global accuracy: trace over total (G).
    pub global_acc: f64,
    /// Pixels counted (ignore excluded).
    pub total_pixels: u64,
}

/// Compute C, mIoU and G from accumulated counts. Errors on an empty
/// matrix.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyConfusion);
    }
    let k = cm.num_classes();
    let mut per_class_acc = Vec::with_capacity(k);
    let mut per_class_iou = Vec::with_capacity(k);
    let mut acc_sum = 0.0;
    let mut acc_n = 0u32;
    let mut iou_sum = 0.0;
    let mut iou_n = 0u32;
    let mut trace = 0u64;

    for g in 0..k {
        let t_g = cm.gt_total(g);
        let p_g = cm.pred_total(g);
        let diag = cm.count(g, g);
        trace += diag;

        if t_g > 0 {
            let a = 100.0 * diag as f64 / t_g as f64;
            per_class_acc.push(Some(a));
            acc_sum += a;
            acc_n += 1;
        } else {
            per_class_acc.push(None);
        }

        if t_g + p_g > 0 {
            let iou = 100.0 * diag as f64 / (t_g + p_g - diag) as f64;
            per_class_iou.push(Some(iou));
            iou_sum += iou;
            iou_n += 1;
        } else {
            per_class_iou.push(None);
        }
    }

    Ok(Metrics {
        per_class_acc,
        per_class_iou,
        class_acc: acc_sum / acc_n.max(1) as f64,
        miou: iou_sum / iou_n.max(1) as f64,
        global_acc: 100.0 * trace as f64 / total as f64,
        total_pixels: total,
    })
}

impl Metrics {
    /// Aligned human-readable report, percentages to two decimals.
    pub fn render_text(&self, table: &ClassTable) -> String {
        let name_w = (0..table.len())
            .map(|i| table.name(i).len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<name_w$}  {:>8}  {:>8}", "class", "acc", "IoU");
        for i in 0..table.len() {
            let fmt = |v: Option<f64>| match v {
                Some(v) => format!("{v:8.2}"),
                None => format!("{:>8}", "-"),
            };
            let _ = writeln!(
                out,
                "{:<name_w$}  {}  {}",
                table.name(i),
                fmt(self.per_class_acc.get(i).copied().flatten()),
                fmt(self.per_class_iou.get(i).copied().flatten()),
            );
        }
        let _ = writeln!(out, "{:-<width$}", "", width = name_w + 20);
        let _ = writeln!(out, "{:<name_w$}  {:8.2}", "C", self.class_acc);
        let _ = writeln!(out, "{:<name_w$}  {:8.2}", "mIoU", self.miou);
        let _ = writeln!(out, "{:<name_w$}  {:8.2}", "G", self.global_acc);
        let _ = writeln!(out, "{:<name_w$}  {:8}", "pixels", self.total_pixels);
        out
    }

    /// Machine-readable key=value records, one per line.
    pub fn render_records(&self, table: &ClassTable) -> String {
        let mut out = String::new();
        for i in 0..table.len() {
            if let Some(Some(a)) = self.per_class_acc.get(i) {
                let _ = writeln!(out, "class.{i}.acc={a:.2}");
            }
            if let Some(Some(iou)) = self.per_class_iou.get(i) {
                let _ = writeln!(out, "class.{i}.iou={iou:.2}");
            }
            let _ = writeln!(out, "class.{i}.name={}", table.name(i));
        }
        let _ = writeln!(out, "C={:.2}", self.class_acc);
        let _ = writeln!(out, "mIoU={:.2}", self.miou);
        let _ = writeln!(out, "G={:.2}", self.global_acc);
        let _ = writeln!(out, "pixels={}", self.total_pixels);
        out
    }
}
