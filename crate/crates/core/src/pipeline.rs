//! Orchestration of the validation procedure over two datasets.
//!
//! For every reference context in set A, batches of similar contexts are
//! collected from both datasets; whenever the B-side batch is non-empty the
//! per-batch performance distributions are compared and the participating
//! contexts are accumulated into the overlap subsets. The loop over
//! references is asymmetric by construction: `compare(a, b, ..)` measures
//! how well B predicts performance on A, not the reverse.
//!
//! The per-reference loop runs in parallel over immutable inputs;
//! aggregation is keyed by reference object id, so reports are byte-identical
//! regardless of worker count.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::context::{mask_for, similarity_unchecked, PatchMask, PatchSpec, THETA_TOLERANCE};
use crate::dataset::{
    class_tables_match, dataset_summary, require_valid, ClassDef, ClassId, Dataset,
    DatasetSummary, GroundTruthObject, ImageRecord, ObjectId,
};
use crate::error::{Error, Result};
use crate::eval::{object_performance, PerformanceTable};
use crate::stats::{mean_abs_diff_of_means, pointwise_mean_diff, wasserstein1, SampleSet};

/// Statistical reduction applied to the per-batch distance lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Median,
    Max,
}

impl Reduction {
    pub fn name(&self) -> &'static str {
        match self {
            Reduction::Mean => "mean",
            Reduction::Median => "median",
            Reduction::Max => "max",
        }
    }

    fn apply(&self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        Some(match self {
            Reduction::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Reduction::Median => {
                let mut sorted = values.to_vec();
                sorted.sort_by(f64::total_cmp);
                let n = sorted.len();
                if n % 2 == 1 {
                    sorted[n / 2]
                } else {
                    0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
                }
            }
            Reduction::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Reduction::Mean),
            "median" => Ok(Reduction::Median),
            "max" => Ok(Reduction::Max),
            other => Err(Error::InvalidConfig(format!(
                "reduction must be mean, median, or max, got '{other}'"
            ))),
        }
    }
}

/// Parameters of one comparison run.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    /// Similarity threshold for batch membership.
    pub theta: f64,
    /// Context patch size.
    pub patch: PatchSpec,
    /// Predictions below this confidence are discarded before matching.
    pub confidence_floor: f64,
    /// Batches smaller than this on either side are skipped.
    pub min_batch_size: usize,
    /// Restrict the run to these classes; `None` means every class.
    pub classes: Option<Vec<ClassId>>,
    /// Reduction over the per-batch distance lists.
    pub reduction: Reduction,
    /// Maximum center distance when pairing objects for the point-wise
    /// comparison.
    pub pairing_radius: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            theta: 0.8,
            patch: PatchSpec::square(120).expect("default patch is valid"),
            confidence_floor: 0.0,
            min_batch_size: 1,
            classes: None,
            reduction: Reduction::Mean,
            pairing_radius: 32.0,
        }
    }
}

impl CompareConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) || !self.theta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "theta must be in [0, 1], got {}",
                self.theta
            )));
        }
        if self.min_batch_size < 1 {
            return Err(Error::InvalidConfig(
                "min_batch_size must be at least 1".into(),
            ));
        }
        if !self.confidence_floor.is_finite() {
            return Err(Error::InvalidConfig("confidence_floor must be finite".into()));
        }
        if !(self.pairing_radius > 0.0) {
            return Err(Error::InvalidConfig("pairing_radius must be positive".into()));
        }
        Ok(())
    }
}

/// One iteration of the reference loop that produced a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub reference: ObjectId,
    /// Contexts from A similar to the reference, sorted by id; always
    /// contains the reference itself.
    pub members_a: Vec<ObjectId>,
    /// Contexts from B similar to the reference, sorted by id; non-empty.
    pub members_b: Vec<ObjectId>,
    pub w1: f64,
    pub m_diff: f64,
}

/// Per-class outcome of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassComparison {
    pub class_id: ClassId,
    pub class_name: String,
    /// Number of contexts of this class in A and B.
    pub contexts_a: usize,
    pub contexts_b: usize,
    /// Batch records sorted by reference object id.
    pub batches: Vec<BatchRecord>,
    /// Reduction of the per-batch W1 list; absent when no batches exist,
    /// which is distinct from a measured zero.
    pub w1_reduced: Option<f64>,
    pub m_diff_reduced: Option<f64>,
    pub overlap_a: Vec<ObjectId>,
    pub overlap_b: Vec<ObjectId>,
    pub no_overlap_a: Vec<ObjectId>,
    pub no_overlap_b: Vec<ObjectId>,
    pub overlap_fraction_a: f64,
    pub overlap_fraction_b: f64,
    pub mean_batch_size_a: Option<f64>,
    pub mean_batch_size_b: Option<f64>,
}

impl ClassComparison {
    /// True when no reference found any similar context in B.
    pub fn no_overlap(&self) -> bool {
        self.batches.is_empty()
    }
}

/// Full result of comparing two datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub set_a: String,
    pub set_b: String,
    pub config: CompareConfig,
    pub summary_a: DatasetSummary,
    pub summary_b: DatasetSummary,
    pub classes: Vec<ClassComparison>,
}

struct ClassObject {
    id: ObjectId,
    mask: PatchMask,
    iou: f64,
}

fn class_objects(
    d: &Dataset,
    class: ClassId,
    spec: PatchSpec,
    perf: &PerformanceTable,
) -> Vec<ClassObject> {
    let pairs: Vec<(&ImageRecord, &GroundTruthObject)> = d
        .objects()
        .filter(|(_, gt)| gt.class == class)
        .collect();
    let mut objects: Vec<ClassObject> = pairs
        .par_iter()
        .map(|(img, gt)| ClassObject {
            id: gt.id.clone(),
            mask: mask_for(img, gt, spec),
            iou: perf
                .iou(&gt.id)
                .expect("performance table covers every ground-truth object"),
        })
        .collect();
    objects.sort_by(|a, b| a.id.cmp(&b.id));
    objects
}

fn selected_classes(d: &Dataset, cfg: &CompareConfig) -> Result<Vec<ClassDef>> {
    match &cfg.classes {
        None => Ok(d.class_table.clone()),
        Some(wanted) => {
            for id in wanted {
                if !d.class_table.iter().any(|c| &c.id == id) {
                    return Err(Error::InvalidConfig(format!(
                        "class filter names unknown class {id}"
                    )));
                }
            }
            Ok(d.class_table
                .iter()
                .filter(|c| wanted.contains(&c.id))
                .cloned()
                .collect())
        }
    }
}

fn compare_class(
    class: &ClassDef,
    objs_a: &[ClassObject],
    objs_b: &[ClassObject],
    cfg: &CompareConfig,
) -> ClassComparison {
    let threshold = cfg.theta - THETA_TOLERANCE;

    let batches: Vec<BatchRecord> = objs_a
        .par_iter()
        .map(|reference| {
            let members_a: Vec<usize> = objs_a
                .iter()
                .enumerate()
                .filter(|(_, o)| similarity_unchecked(&reference.mask, &o.mask) >= threshold)
                .map(|(j, _)| j)
                .collect();
            let members_b: Vec<usize> = objs_b
                .iter()
                .enumerate()
                .filter(|(_, o)| similarity_unchecked(&reference.mask, &o.mask) >= threshold)
                .map(|(j, _)| j)
                .collect();
            if members_b.is_empty()
                || members_a.len() < cfg.min_batch_size
                || members_b.len() < cfg.min_batch_size
            {
                return None;
            }
            let sample_a = SampleSet::new(members_a.iter().map(|&j| objs_a[j].iou).collect())
                .expect("batch IOUs are a non-empty [0, 1] sample");
            let sample_b = SampleSet::new(members_b.iter().map(|&j| objs_b[j].iou).collect())
                .expect("batch IOUs are a non-empty [0, 1] sample");
            Some(BatchRecord {
                reference: reference.id.clone(),
                members_a: members_a.iter().map(|&j| objs_a[j].id.clone()).collect(),
                members_b: members_b.iter().map(|&j| objs_b[j].id.clone()).collect(),
                w1: wasserstein1(&sample_a, &sample_b),
                m_diff: mean_abs_diff_of_means(&sample_a, &sample_b),
            })
        })
        .flatten()
        .collect();

    let mut overlap_a: BTreeSet<ObjectId> = BTreeSet::new();
    let mut overlap_b: BTreeSet<ObjectId> = BTreeSet::new();
    let mut w1_list = Vec::with_capacity(batches.len());
    let mut m_diff_list = Vec::with_capacity(batches.len());
    let mut size_a_sum = 0usize;
    let mut size_b_sum = 0usize;
    for rec in &batches {
        debug_assert!(rec.members_a.binary_search(&rec.reference).is_ok());
        overlap_a.extend(rec.members_a.iter().cloned());
        overlap_b.extend(rec.members_b.iter().cloned());
        w1_list.push(rec.w1);
        m_diff_list.push(rec.m_diff);
        size_a_sum += rec.members_a.len();
        size_b_sum += rec.members_b.len();
    }

    let no_overlap_a: Vec<ObjectId> = objs_a
        .iter()
        .filter(|o| !overlap_a.contains(&o.id))
        .map(|o| o.id.clone())
        .collect();
    let no_overlap_b: Vec<ObjectId> = objs_b
        .iter()
        .filter(|o| !overlap_b.contains(&o.id))
        .map(|o| o.id.clone())
        .collect();

    let fraction = |part: usize, whole: usize| {
        if whole == 0 {
            0.0
        } else {
            part as f64 / whole as f64
        }
    };
    let mean_size = |sum: usize, n: usize| {
        if n == 0 {
            None
        } else {
            Some(sum as f64 / n as f64)
        }
    };

    ClassComparison {
        class_id: class.id,
        class_name: class.name.clone(),
        contexts_a: objs_a.len(),
        contexts_b: objs_b.len(),
        w1_reduced: cfg.reduction.apply(&w1_list),
        m_diff_reduced: cfg.reduction.apply(&m_diff_list),
        overlap_fraction_a: fraction(overlap_a.len(), objs_a.len()),
        overlap_fraction_b: fraction(overlap_b.len(), objs_b.len()),
        mean_batch_size_a: mean_size(size_a_sum, batches.len()),
        mean_batch_size_b: mean_size(size_b_sum, batches.len()),
        overlap_a: overlap_a.into_iter().collect(),
        overlap_b: overlap_b.into_iter().collect(),
        no_overlap_a,
        no_overlap_b,
        batches,
    }
}

/// Runs the full comparison of B's ability to predict performance on A.
///
/// Both datasets must be valid and share one class table. The run is
/// partitioned per class; within a class, every context of A serves as a
/// reference once.
pub fn compare(a: &Dataset, b: &Dataset, cfg: &CompareConfig) -> Result<CompareReport> {
    cfg.validate()?;
    require_valid(a)?;
    require_valid(b)?;
    if !class_tables_match(a, b) {
        return Err(Error::ClassTableMismatch(format!(
            "'{}' and '{}' declare different classes",
            a.name, b.name
        )));
    }
    let classes = selected_classes(a, cfg)?;
    let perf_a = object_performance(a, cfg.confidence_floor);
    let perf_b = object_performance(b, cfg.confidence_floor);

    let class_results = classes
        .iter()
        .map(|class| {
            let objs_a = class_objects(a, class.id, cfg.patch, &perf_a);
            let objs_b = class_objects(b, class.id, cfg.patch, &perf_b);
            compare_class(class, &objs_a, &objs_b, cfg)
        })
        .collect();

    Ok(CompareReport {
        set_a: a.name.clone(),
        set_b: b.name.clone(),
        config: cfg.clone(),
        summary_a: dataset_summary(a),
        summary_b: dataset_summary(b),
        classes: class_results,
    })
}

/// Plot-ready view of one class at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepClassStats {
    pub class_id: ClassId,
    pub class_name: String,
    pub n_batches: usize,
    pub w1_reduced: Option<f64>,
    pub m_diff_reduced: Option<f64>,
    pub overlap_fraction_a: f64,
    pub overlap_fraction_b: f64,
    pub mean_batch_size_a: Option<f64>,
    pub mean_batch_size_b: Option<f64>,
}

impl From<&ClassComparison> for SweepClassStats {
    fn from(c: &ClassComparison) -> Self {
        SweepClassStats {
            class_id: c.class_id,
            class_name: c.class_name.clone(),
            n_batches: c.batches.len(),
            w1_reduced: c.w1_reduced,
            m_diff_reduced: c.m_diff_reduced,
            overlap_fraction_a: c.overlap_fraction_a,
            overlap_fraction_b: c.overlap_fraction_b,
            mean_batch_size_a: c.mean_batch_size_a,
            mean_batch_size_b: c.mean_batch_size_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSweepRow {
    pub theta: f64,
    pub per_class: Vec<SweepClassStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSweepRow {
    pub patch: PatchSpec,
    pub per_class: Vec<SweepClassStats>,
}

/// Runs one comparison per threshold and tabulates the plot series.
/// Thresholds must be sorted ascending.
pub fn sweep_theta(
    a: &Dataset,
    b: &Dataset,
    cfg: &CompareConfig,
    thetas: &[f64],
) -> Result<Vec<ThetaSweepRow>> {
    if thetas.is_empty() {
        return Err(Error::InvalidConfig("theta sweep needs at least one value".into()));
    }
    if thetas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("theta sweep must be sorted ascending".into()));
    }
    thetas
        .iter()
        .map(|&theta| {
            let report = compare(a, b, &CompareConfig { theta, ..cfg.clone() })?;
            Ok(ThetaSweepRow {
                theta,
                per_class: report.classes.iter().map(SweepClassStats::from).collect(),
            })
        })
        .collect()
}

/// Runs one comparison per patch size and tabulates the plot series.
pub fn sweep_patch(
    a: &Dataset,
    b: &Dataset,
    cfg: &CompareConfig,
    specs: &[PatchSpec],
) -> Result<Vec<PatchSweepRow>> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig("patch sweep needs at least one size".into()));
    }
    specs
        .iter()
        .map(|&patch| {
            let report = compare(a, b, &CompareConfig { patch, ..cfg.clone() })?;
            Ok(PatchSweepRow {
                patch,
                per_class: report.classes.iter().map(SweepClassStats::from).collect(),
            })
        })
        .collect()
}

/// Per-class outcome of the point-wise comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseClassStats {
    pub class_id: ClassId,
    pub class_name: String,
    pub n_pairs: usize,
    /// Mean absolute IOU difference over paired objects.
    pub pointwise_mean_diff: Option<f64>,
    /// W1 between the full per-class IOU sample sets, for side-by-side
    /// reading against the point-wise number.
    pub distribution_w1: Option<f64>,
}

/// Result of comparing two paired datasets point-wise and
/// distribution-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseReport {
    pub set_a: String,
    pub set_b: String,
    pub config: CompareConfig,
    pub per_class: Vec<PointwiseClassStats>,
}

const PAIR_DISTANCE_TOLERANCE: f64 = 1e-6;

/// Pairs the objects of two twin images of one class by nearest box center.
fn pair_objects<'a>(
    img_a: &'a ImageRecord,
    img_b: &'a ImageRecord,
    class: ClassId,
    radius: f64,
) -> Result<Vec<(&'a GroundTruthObject, &'a GroundTruthObject)>> {
    let a_objs: Vec<&GroundTruthObject> = img_a
        .ground_truth
        .iter()
        .filter(|g| g.class == class)
        .collect();
    let b_objs: Vec<&GroundTruthObject> = img_b
        .ground_truth
        .iter()
        .filter(|g| g.class == class)
        .collect();
    if a_objs.len() != b_objs.len() {
        return Err(Error::Pairing(format!(
            "images '{}' and '{}' have {} vs {} objects of class {class}",
            img_a.image_id,
            img_b.image_id,
            a_objs.len(),
            b_objs.len()
        )));
    }

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (ai, a) in a_objs.iter().enumerate() {
        let (ax, ay) = a.bbox.center();
        for (bi, b) in b_objs.iter().enumerate() {
            let (bx, by) = b.bbox.center();
            let dist = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
            if dist <= radius {
                candidates.push((dist, ai, bi));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut used_a = vec![false; a_objs.len()];
    let mut used_b = vec![false; b_objs.len()];
    let mut pairs = Vec::with_capacity(a_objs.len());
    for (k, &(dist, ai, bi)) in candidates.iter().enumerate() {
        if used_a[ai] || used_b[bi] {
            continue;
        }
        for &(dist2, aj, bj) in &candidates[k + 1..] {
            if dist2 - dist > PAIR_DISTANCE_TOLERANCE {
                break;
            }
            let contends =
                (aj == ai && bj != bi && !used_b[bj]) || (bj == bi && aj != ai && !used_a[aj]);
            if contends {
                return Err(Error::Pairing(format!(
                    "ambiguous pairing in image '{}': {} is equidistant to two counterparts",
                    img_a.image_id, a_objs[ai].id
                )));
            }
        }
        used_a[ai] = true;
        used_b[bi] = true;
        pairs.push((a_objs[ai], b_objs[bi]));
    }

    if pairs.len() != a_objs.len() {
        return Err(Error::Pairing(format!(
            "image '{}': {} object(s) of class {class} have no counterpart within {radius} px",
            img_a.image_id,
            a_objs.len() - pairs.len()
        )));
    }
    Ok(pairs)
}

/// Compares two paired datasets both point-wise (mean absolute difference
/// over object pairs) and distribution-wise (W1 over the full per-class IOU
/// sets). Images are aligned by `pair_key` and must correspond one-to-one;
/// objects are paired by class and nearest box center within
/// `cfg.pairing_radius`.
pub fn pointwise_compare(a: &Dataset, b: &Dataset, cfg: &CompareConfig) -> Result<PointwiseReport> {
    cfg.validate()?;
    require_valid(a)?;
    require_valid(b)?;
    if !class_tables_match(a, b) {
        return Err(Error::ClassTableMismatch(format!(
            "'{}' and '{}' declare different classes",
            a.name, b.name
        )));
    }
    let classes = selected_classes(a, cfg)?;

    let mut b_by_key = std::collections::HashMap::new();
    for img in &b.images {
        if let Some(key) = &img.pair_key {
            b_by_key.insert(key.as_str(), img);
        }
    }
    let mut image_pairs = Vec::with_capacity(a.images.len());
    let mut consumed = std::collections::HashSet::new();
    for img_a in &a.images {
        let key = img_a.pair_key.as_deref().ok_or_else(|| {
            Error::Pairing(format!("image '{}' has no pair_key", img_a.image_id))
        })?;
        let img_b = b_by_key.get(key).copied().ok_or_else(|| {
            Error::Pairing(format!(
                "no image in '{}' matches pair_key '{key}'",
                b.name
            ))
        })?;
        consumed.insert(key);
        image_pairs.push((img_a, img_b));
    }
    if consumed.len() != b.images.len() {
        return Err(Error::Pairing(format!(
            "{} image(s) in '{}' have no counterpart in '{}'",
            b.images.len() - consumed.len(),
            b.name,
            a.name
        )));
    }

    let perf_a = object_performance(a, cfg.confidence_floor);
    let perf_b = object_performance(b, cfg.confidence_floor);

    let mut per_class = Vec::with_capacity(classes.len());
    for class in &classes {
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (img_a, img_b) in &image_pairs {
            for (obj_a, obj_b) in pair_objects(img_a, img_b, class.id, cfg.pairing_radius)? {
                let iou_a = perf_a.iou(&obj_a.id).expect("table covers A");
                let iou_b = perf_b.iou(&obj_b.id).expect("table covers B");
                pairs.push((iou_a, iou_b));
            }
        }

        let ious = |d: &Dataset, perf: &PerformanceTable| -> Vec<f64> {
            d.objects()
                .filter(|(_, gt)| gt.class == class.id)
                .map(|(_, gt)| perf.iou(&gt.id).expect("table covers dataset"))
                .collect()
        };
        let all_a = ious(a, &perf_a);
        let all_b = ious(b, &perf_b);

        let distribution_w1 = if all_a.is_empty() || all_b.is_empty() {
            None
        } else {
            Some(wasserstein1(
                &SampleSet::new(all_a)?,
                &SampleSet::new(all_b)?,
            ))
        };
        per_class.push(PointwiseClassStats {
            class_id: class.id,
            class_name: class.name.clone(),
            n_pairs: pairs.len(),
            pointwise_mean_diff: if pairs.is_empty() {
                None
            } else {
                Some(pointwise_mean_diff(&pairs)?)
            },
            distribution_w1,
        });
    }

    Ok(PointwiseReport {
        set_a: a.name.clone(),
        set_b: b.name.clone(),
        config: cfg.clone(),
        per_class,
    })
}
