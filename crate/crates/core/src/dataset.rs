//! Data model for labeled object-detection datasets.
//!
//! A [`Dataset`] is a collection of images, each carrying hand- or
//! auto-labeled ground-truth boxes plus the predictions some detector
//! emitted for that image. Images themselves are never read: everything
//! downstream operates on label geometry and image dimensions alone.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Axis-aligned box in continuous pixel coordinates, origin top-left, y down.
///
/// Boxes are stored as corners rather than center/size so that intersection
/// and union arithmetic stays direct.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    /// Builds a box, rejecting non-finite coordinates and zero or negative area.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite coordinate in {b}")));
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidBox(format!("zero or negative area in {b}")));
        }
        Ok(b)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Box center in image coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    /// True when the boxes share interior area (touching edges do not count).
    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }

    pub(crate) fn is_valid(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.x_min, self.y_min, self.x_max, self.y_max
        )
    }
}

/// Numeric class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Class-table entry: id plus display name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub id: ClassId,
    pub name: String,
}

/// Identifier of one ground-truth object: owning image plus the object's
/// position in that image's label list. Unique across a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId {
    image: Arc<str>,
    index: u32,
}

impl ObjectId {
    pub fn new(image: impl Into<Arc<str>>, index: u32) -> Self {
        ObjectId {
            image: image.into(),
            index,
        }
    }

    pub fn image_id(&self) -> &str {
        &self.image
    }

    pub fn index(&self) -> u32 {
        self.index
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.image, self.index)
    }
}

/// One labeled ground-truth object.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub id: ObjectId,
    pub class: ClassId,
    pub bbox: BoundingBox,
}

/// One detector output for an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: ClassId,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

/// A single image's labels and predictions. `pair_key` aligns images across
/// two datasets acquired as twins; it is optional and only consumed by the
/// point-wise comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub ground_truth: Vec<GroundTruthObject>,
    pub predictions: Vec<Prediction>,
    pub pair_key: Option<String>,
}

/// A named collection of image records sharing one class table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub class_table: Vec<ClassDef>,
    pub images: Vec<ImageRecord>,
}

impl Dataset {
    /// Iterates every ground-truth object with its owning image.
    pub fn objects(&self) -> impl Iterator<Item = (&ImageRecord, &GroundTruthObject)> {
        self.images
            .iter()
            .flat_map(|img| img.ground_truth.iter().map(move |gt| (img, gt)))
    }

    /// Looks up one object by id.
    pub fn find_object(&self, id: &ObjectId) -> Option<(&ImageRecord, &GroundTruthObject)> {
        let img = self.images.iter().find(|i| i.image_id == id.image_id())?;
        let gt = img.ground_truth.iter().find(|g| &g.id == id)?;
        Some((img, gt))
    }

    pub fn class_name(&self, id: ClassId) -> Option<&str> {
        self.class_table
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.name.as_str())
    }

    pub fn object_count(&self) -> usize {
        self.images.iter().map(|i| i.ground_truth.len()).sum()
    }
}

/// One invariant violation found by [`validate_dataset`]. Violations are
/// data, not failures: a scan returns all of them instead of stopping at
/// the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Owning image, when the violation is image-scoped.
    pub image_id: Option<String>,
    /// Field or component the violation refers to.
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.image_id {
            Some(img) => write!(f, "[{img}] {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

fn violation(image_id: Option<&str>, field: &str, message: impl Into<String>) -> Violation {
    Violation {
        image_id: image_id.map(str::to_owned),
        field: field.to_owned(),
        message: message.into(),
    }
}

/// Checks every type invariant of a dataset and returns the violations found.
/// An empty result means the dataset is well formed.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut class_ids = HashSet::new();
    for c in &d.class_table {
        if !class_ids.insert(c.id) {
            out.push(violation(
                None,
                "class_table",
                format!("duplicate class id {}", c.id),
            ));
        }
    }

    let mut object_ids = HashSet::new();
    let mut pair_keys = HashSet::new();
    let mut image_ids = HashSet::new();

    for img in &d.images {
        let iid = Some(img.image_id.as_str());
        if !image_ids.insert(img.image_id.as_str()) {
            out.push(violation(iid, "image_id", "duplicate image id"));
        }
        if img.width == 0 {
            out.push(violation(iid, "width", "must be positive"));
        }
        if img.height == 0 {
            out.push(violation(iid, "height", "must be positive"));
        }
        if let Some(key) = &img.pair_key {
            if !pair_keys.insert(key.as_str()) {
                out.push(violation(iid, "pair_key", format!("duplicate key '{key}'")));
            }
        }

        let image_rect = BoundingBox {
            x_min: 0.0,
            y_min: 0.0,
            x_max: img.width as f64,
            y_max: img.height as f64,
        };

        for (k, gt) in img.ground_truth.iter().enumerate() {
            let field = format!("ground_truth[{k}]");
            if !object_ids.insert(gt.id.clone()) {
                out.push(violation(iid, &field, format!("duplicate object id {}", gt.id)));
            }
            if !gt.bbox.is_valid() {
                out.push(violation(iid, &field, format!("invalid box {}", gt.bbox)));
            } else if img.width > 0 && img.height > 0 && !gt.bbox.intersects(&image_rect) {
                out.push(violation(
                    iid,
                    &field,
                    format!("box {} is entirely outside the image", gt.bbox),
                ));
            }
            if !class_ids.contains(&gt.class) {
                out.push(violation(iid, &field, format!("unknown class {}", gt.class)));
            }
        }

        for (k, p) in img.predictions.iter().enumerate() {
            let field = format!("predictions[{k}]");
            if !p.bbox.is_valid() {
                out.push(violation(iid, &field, format!("invalid box {}", p.bbox)));
            }
            if !(0.0..=1.0).contains(&p.confidence) || !p.confidence.is_finite() {
                out.push(violation(
                    iid,
                    &field,
                    format!("confidence {} outside [0, 1]", p.confidence),
                ));
            }
            if !class_ids.contains(&p.class) {
                out.push(violation(iid, &field, format!("unknown class {}", p.class)));
            }
        }
    }

    out
}

/// Errors out when a dataset fails validation; used by pipeline entry points.
pub(crate) fn require_valid(d: &Dataset) -> Result<()> {
    let violations = validate_dataset(d);
    if let Some(first) = violations.first() {
        return Err(Error::InvalidDataset {
            name: d.name.clone(),
            count: violations.len(),
            first: first.to_string(),
        });
    }
    Ok(())
}

/// Five-number summary of ground-truth box heights in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightQuantiles {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

/// Aggregate description of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub image_count: u64,
    /// Ground-truth object count per class id.
    pub per_class_counts: BTreeMap<ClassId, u64>,
    /// Absent when the dataset has no ground-truth objects.
    pub box_height_quantiles: Option<HeightQuantiles>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    // Linear interpolation between closest ranks.
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Computes exact counts and box-height quantiles for a dataset.
pub fn dataset_summary(d: &Dataset) -> DatasetSummary {
    let mut per_class_counts: BTreeMap<ClassId, u64> =
        d.class_table.iter().map(|c| (c.id, 0)).collect();
    let mut heights = Vec::with_capacity(d.object_count());
    for (_, gt) in d.objects() {
        *per_class_counts.entry(gt.class).or_insert(0) += 1;
        heights.push(gt.bbox.height());
    }
    heights.sort_by(f64::total_cmp);
    let box_height_quantiles = if heights.is_empty() {
        None
    } else {
        Some(HeightQuantiles {
            min: heights[0],
            p25: quantile(&heights, 0.25),
            median: quantile(&heights, 0.5),
            p75: quantile(&heights, 0.75),
            max: *heights.last().unwrap(),
        })
    };
    DatasetSummary {
        image_count: d.images.len() as u64,
        per_class_counts,
        box_height_quantiles,
    }
}

/// True when both tables define the same set of (id, name) classes.
pub(crate) fn class_tables_match(a: &Dataset, b: &Dataset) -> bool {
    let key = |d: &Dataset| -> BTreeSet<(ClassId, String)> {
        d.class_table
            .iter()
            .map(|c| (c.id, c.name.clone()))
            .collect()
    };
    key(a) == key(b)
}
