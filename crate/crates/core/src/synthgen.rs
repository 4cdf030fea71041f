//! Deterministic synthetic datasets and corrupted prediction sets.
//!
//! Scenes are generated directly in label space: the validation method
//! consumes only geometry and per-object performance, so no rendering is
//! involved. A corruption model then plays the role of the detector,
//! producing predictions with controlled miss rates, jitter, and false
//! positives. Everything is driven by a ChaCha8 stream seeded with a
//! caller-provided seed; the draw order is documented per operation so tests
//! can replay it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::dataset::{
    BoundingBox, ClassDef, ClassId, Dataset, GroundTruthObject, ImageRecord, ObjectId, Prediction,
};
use crate::error::{Error, Result};

/// Placement model for generated objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    /// Object centers drawn uniformly over the feasible region.
    Uniform,
    /// Object centers drawn around one per-image cluster center with the
    /// given normal radius, then clamped to the feasible region.
    Clustered { radius: f64 },
}

/// Parameters of a generated scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub images: u32,
    pub width: u32,
    pub height: u32,
    /// Inclusive range of objects per image.
    pub objects_per_image: (u32, u32),
    /// Number of classes; ids are `0..classes`.
    pub classes: u32,
    /// Relative class frequencies; one entry per class, or a single entry to
    /// mean equal mixing.
    pub class_mix: Vec<f64>,
    /// Inclusive box-height range in pixels (a crude perspective proxy).
    pub box_height: (f64, f64),
    /// Width-to-height ratio of generated boxes.
    pub aspect_ratio: f64,
    /// Minimum center-to-center distance between objects in one image.
    pub min_separation: f64,
    pub placement: Placement,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "synthetic".into(),
            images: 100,
            width: 1280,
            height: 720,
            objects_per_image: (10, 18),
            classes: 2,
            class_mix: vec![1.0],
            box_height: (18.0, 42.0),
            aspect_ratio: 0.75,
            min_separation: 24.0,
            placement: Placement::Uniform,
        }
    }
}

impl ScenarioConfig {
    fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::InvalidConfig(m));
        if self.width == 0 || self.height == 0 {
            return err("image dimensions must be positive".into());
        }
        if self.objects_per_image.0 > self.objects_per_image.1 {
            return err("objects_per_image range is empty".into());
        }
        if self.classes == 0 {
            return err("need at least one class".into());
        }
        if self.class_mix.len() != 1 && self.class_mix.len() != self.classes as usize {
            return err(format!(
                "class_mix needs 1 or {} entries, got {}",
                self.classes,
                self.class_mix.len()
            ));
        }
        if self.class_mix.iter().any(|w| !w.is_finite() || *w < 0.0)
            || self.class_mix.iter().sum::<f64>() <= 0.0
        {
            return err("class_mix weights must be non-negative with positive sum".into());
        }
        if !(self.box_height.0 > 0.0 && self.box_height.0 <= self.box_height.1) {
            return err("box_height range is empty or non-positive".into());
        }
        if self.aspect_ratio <= 0.0 {
            return err("aspect_ratio must be positive".into());
        }
        if self.min_separation < 0.0 {
            return err("min_separation must be non-negative".into());
        }
        if let Placement::Clustered { radius } = self.placement {
            if radius < 0.0 {
                return err("cluster radius must be non-negative".into());
            }
        }
        Ok(())
    }

    fn class_table(&self) -> Vec<ClassDef> {
        (0..self.classes)
            .map(|id| ClassDef {
                id: ClassId(id),
                name: format!("class_{id}"),
            })
            .collect()
    }
}

/// A generated dataset plus placement bookkeeping for the summary.
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub dataset: Dataset,
    /// Objects abandoned after exhausting placement attempts.
    pub skipped_placements: u64,
}

const MAX_PLACEMENT_ATTEMPTS: u32 = 10_000;

fn pick_class(mix: &[f64], classes: u32, u: f64) -> u32 {
    if mix.len() == 1 {
        // equal mixing
        return ((u * classes as f64) as u32).min(classes - 1);
    }
    let total: f64 = mix.iter().sum();
    let mut acc = 0.0;
    for (idx, w) in mix.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return idx as u32;
        }
    }
    classes - 1
}

/// Applies a center translation and multiplicative size change by moving the
/// original corners, so zero jitter reproduces the input box bit-exactly.
fn jitter_box(b: &BoundingBox, dx: f64, dy: f64, scale: f64) -> Result<BoundingBox> {
    let shrink_x = b.width() * (1.0 - scale) / 2.0;
    let shrink_y = b.height() * (1.0 - scale) / 2.0;
    BoundingBox::new(
        b.x_min + dx + shrink_x,
        b.y_min + dy + shrink_y,
        b.x_max + dx - shrink_x,
        b.y_max + dy - shrink_y,
    )
}

/// Translates a box the minimal distance needed to sit inside the image,
/// clipping only if it is larger than the image itself. Keeps every
/// generated label representable as normalized [0, 1] text.
fn fit_box_into_image(b: BoundingBox, width: f64, height: f64) -> BoundingBox {
    let mut out = b;
    if out.width() >= width {
        out.x_min = 0.0;
        out.x_max = width;
    } else if out.x_min < 0.0 {
        out.x_max -= out.x_min;
        out.x_min = 0.0;
    } else if out.x_max > width {
        out.x_min -= out.x_max - width;
        out.x_max = width;
    }
    if out.height() >= height {
        out.y_min = 0.0;
        out.y_max = height;
    } else if out.y_min < 0.0 {
        out.y_max -= out.y_min;
        out.y_min = 0.0;
    } else if out.y_max > height {
        out.y_min -= out.y_max - height;
        out.y_max = height;
    }
    out
}

/// Generates a ground-truth-only dataset.
///
/// Deterministic under `(config, seed)`. Draw order, per image: the object
/// count, then (for clustered placement) the cluster center as two uniforms,
/// then per object up to 10,000 attempts of [class uniform, height uniform,
/// two position draws]. An object whose attempts are exhausted is skipped
/// and counted in [`GeneratedDataset::skipped_placements`].
pub fn generate_dataset(sc: &ScenarioConfig, seed: u64) -> Result<GeneratedDataset> {
    sc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (img_w, img_h) = (sc.width as f64, sc.height as f64);

    let mut images = Vec::with_capacity(sc.images as usize);
    let mut requested: u64 = 0;
    let mut skipped: u64 = 0;

    for img_idx in 0..sc.images {
        let image_id = format!("img_{img_idx:06}");
        let n_objects = rng.random_range(sc.objects_per_image.0..=sc.objects_per_image.1);
        requested += n_objects as u64;

        let cluster = match sc.placement {
            Placement::Uniform => None,
            Placement::Clustered { radius } => {
                let cx = rng.random_range(0.0..img_w);
                let cy = rng.random_range(0.0..img_h);
                Some((cx, cy, radius))
            }
        };

        let mut ground_truth: Vec<GroundTruthObject> = Vec::with_capacity(n_objects as usize);
        for _ in 0..n_objects {
            let mut placed = false;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let class_u: f64 = rng.random();
                let class = pick_class(&sc.class_mix, sc.classes, class_u);
                let h = rng.random_range(sc.box_height.0..=sc.box_height.1);
                let w = h * sc.aspect_ratio;
                if w > img_w || h > img_h {
                    continue;
                }
                let (lo_x, hi_x) = (w / 2.0, img_w - w / 2.0);
                let (lo_y, hi_y) = (h / 2.0, img_h - h / 2.0);
                let (cx, cy) = match cluster {
                    None => (
                        rng.random_range(lo_x..=hi_x),
                        rng.random_range(lo_y..=hi_y),
                    ),
                    Some((ccx, ccy, radius)) => {
                        let zx: f64 = StandardNormal.sample(&mut rng);
                        let zy: f64 = StandardNormal.sample(&mut rng);
                        (
                            (ccx + zx * radius).clamp(lo_x, hi_x),
                            (ccy + zy * radius).clamp(lo_y, hi_y),
                        )
                    }
                };
                let separated = ground_truth.iter().all(|g| {
                    let (gx, gy) = g.bbox.center();
                    ((gx - cx).powi(2) + (gy - cy).powi(2)).sqrt() >= sc.min_separation
                });
                if !separated {
                    continue;
                }
                ground_truth.push(GroundTruthObject {
                    id: ObjectId::new(image_id.as_str(), ground_truth.len() as u32),
                    class: ClassId(class),
                    bbox: BoundingBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)?,
                });
                placed = true;
                break;
            }
            if !placed {
                skipped += 1;
            }
        }

        images.push(ImageRecord {
            image_id: image_id.clone(),
            width: sc.width,
            height: sc.height,
            ground_truth,
            predictions: vec![],
            pair_key: Some(image_id),
        });
    }

    if requested > 0 && skipped == requested {
        return Err(Error::ImpossibleConstraints);
    }

    Ok(GeneratedDataset {
        dataset: Dataset {
            name: sc.name.clone(),
            class_table: sc.class_table(),
            images,
        },
        skipped_placements: skipped,
    })
}

/// Synthetic judge standing in for a detector: drops, jitters, confuses, and
/// invents predictions with configured strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionModel {
    /// Miss probability per class-table position; a single entry applies to
    /// every class.
    pub miss_probability: Vec<f64>,
    /// Standard deviation of the center jitter in pixels.
    pub center_jitter_px: f64,
    /// Multiplicative size jitter: boxes are scaled by `exp(z * sigma)`.
    pub size_jitter: f64,
    /// Expected number of false positives per image (Poisson).
    pub false_positive_rate: f64,
    /// Confidences are drawn uniformly from this inclusive range.
    pub confidence_range: (f64, f64),
    /// Probability that a prediction reports a different class.
    pub class_confusion: f64,
}

impl CorruptionModel {
    /// No corruption at all: every object yields an exact duplicate
    /// prediction with confidence 1.
    pub fn identity() -> Self {
        CorruptionModel {
            miss_probability: vec![0.0],
            center_jitter_px: 0.0,
            size_jitter: 0.0,
            false_positive_rate: 0.0,
            confidence_range: (1.0, 1.0),
            class_confusion: 0.0,
        }
    }

    fn validate(&self, class_count: usize) -> Result<()> {
        let err = |m: String| Err(Error::InvalidConfig(m));
        if self.miss_probability.is_empty()
            || (self.miss_probability.len() != 1 && self.miss_probability.len() != class_count)
        {
            return err(format!(
                "miss_probability needs 1 or {class_count} entries, got {}",
                self.miss_probability.len()
            ));
        }
        if self
            .miss_probability
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return err("miss probabilities must be in [0, 1]".into());
        }
        if self.center_jitter_px < 0.0 || self.size_jitter < 0.0 {
            return err("jitter standard deviations must be non-negative".into());
        }
        if self.false_positive_rate < 0.0 {
            return err("false_positive_rate must be non-negative".into());
        }
        let (lo, hi) = self.confidence_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return err("confidence_range must satisfy 0 <= lo <= hi <= 1".into());
        }
        if !(0.0..=1.0).contains(&self.class_confusion) {
            return err("class_confusion must be in [0, 1]".into());
        }
        Ok(())
    }

    fn miss_for(&self, class_pos: usize) -> f64 {
        if self.miss_probability.len() == 1 {
            self.miss_probability[0]
        } else {
            self.miss_probability[class_pos]
        }
    }
}

/// Replaces a dataset's predictions with corrupted copies of its ground
/// truth.
///
/// Deterministic under `(dataset, model, seed)`. Draw order, per image: for
/// each ground-truth object in label order exactly seven draws
/// [miss uniform, center-x normal, center-y normal, size normal,
/// confusion uniform, class-pick uniform, confidence uniform] regardless of
/// outcome, so changing one probability never shifts the stream for later
/// objects; then one Poisson count when the false-positive rate is nonzero,
/// and per false positive [class uniform, height uniform, center-x uniform,
/// center-y uniform, confidence uniform].
pub fn synthesize_predictions(d: &Dataset, cm: &CorruptionModel, seed: u64) -> Result<Dataset> {
    cm.validate(d.class_table.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class_pos: std::collections::HashMap<ClassId, usize> = d
        .class_table
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id, i))
        .collect();

    let mut out = d.clone();
    for img in &mut out.images {
        let (img_w, img_h) = (img.width as f64, img.height as f64);
        let mut predictions = Vec::new();

        for gt in &img.ground_truth {
            let miss_u: f64 = rng.random();
            let zx: f64 = StandardNormal.sample(&mut rng);
            let zy: f64 = StandardNormal.sample(&mut rng);
            let zs: f64 = StandardNormal.sample(&mut rng);
            let confuse_u: f64 = rng.random();
            let class_u: f64 = rng.random();
            let conf_u: f64 = rng.random();

            let pos = class_pos[&gt.class];
            if miss_u < cm.miss_for(pos) {
                continue;
            }

            let class = if cm.class_confusion > 0.0
                && confuse_u < cm.class_confusion
                && d.class_table.len() > 1
            {
                let other = (class_u * (d.class_table.len() - 1) as f64) as usize;
                let other = other.min(d.class_table.len() - 2);
                let idx = if other >= pos { other + 1 } else { other };
                d.class_table[idx].id
            } else {
                gt.class
            };

            let bbox = fit_box_into_image(
                jitter_box(
                    &gt.bbox,
                    zx * cm.center_jitter_px,
                    zy * cm.center_jitter_px,
                    (zs * cm.size_jitter).exp(),
                )?,
                img_w,
                img_h,
            );
            predictions.push(Prediction {
                class,
                bbox,
                confidence: cm.confidence_range.0
                    + conf_u * (cm.confidence_range.1 - cm.confidence_range.0),
            });
        }

        if cm.false_positive_rate > 0.0 {
            let poisson = Poisson::new(cm.false_positive_rate)
                .map_err(|e| Error::InvalidConfig(format!("false_positive_rate: {e}")))?;
            let count = poisson.sample(&mut rng) as u64;
            for _ in 0..count {
                let class_u: f64 = rng.random();
                let h = rng.random_range(0.02 * img_h..=0.2 * img_h);
                let w = h * 0.75;
                let cx = rng.random_range(0.0..img_w);
                let cy = rng.random_range(0.0..img_h);
                let conf_u: f64 = rng.random();
                let class = d.class_table
                    [((class_u * d.class_table.len() as f64) as usize).min(d.class_table.len() - 1)]
                .id;
                let bbox = fit_box_into_image(
                    BoundingBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)?,
                    img_w,
                    img_h,
                );
                predictions.push(Prediction {
                    class,
                    bbox,
                    confidence: cm.confidence_range.0
                        + conf_u * (cm.confidence_range.1 - cm.confidence_range.0),
                });
            }
        }

        img.predictions = predictions;
    }

    Ok(out)
}

/// Jitters every ground-truth box, modeling pose uncertainty between twin
/// datasets. Pair keys are preserved so the result stays paired with the
/// input; predictions are carried over unchanged.
///
/// Draw order: per ground-truth object in (image, label) order, three draws
/// [center-x normal, center-y normal, size normal]. With zero standard
/// deviations the output equals the input exactly.
pub fn perturb_layout(d: &Dataset, pos_stddev_px: f64, size_stddev: f64, seed: u64) -> Result<Dataset> {
    if pos_stddev_px < 0.0 || size_stddev < 0.0 {
        return Err(Error::InvalidConfig(
            "perturbation standard deviations must be non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = d.clone();
    for img in &mut out.images {
        let (img_w, img_h) = (img.width as f64, img.height as f64);
        for gt in &mut img.ground_truth {
            let zx: f64 = StandardNormal.sample(&mut rng);
            let zy: f64 = StandardNormal.sample(&mut rng);
            let zs: f64 = StandardNormal.sample(&mut rng);
            gt.bbox = fit_box_into_image(
                jitter_box(
                    &gt.bbox,
                    zx * pos_stddev_px,
                    zy * pos_stddev_px,
                    (zs * size_stddev).exp(),
                )?,
                img_w,
                img_h,
            );
        }
    }
    Ok(out)
}
