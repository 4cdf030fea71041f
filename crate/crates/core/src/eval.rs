//! Per-object detection performance.
//!
//! Each ground-truth object gets one IOU value: the intersection-over-union
//! of its box with the prediction matched to it, or 0 when nothing matched.
//! Matching is greedy in descending confidence, one-to-one, and class-aware;
//! false-positive predictions are recorded but carry no performance of their
//! own.

use std::collections::BTreeMap;

use crate::dataset::{BoundingBox, Dataset, ImageRecord, ObjectId};

/// Intersection over union of two boxes, computed on continuous geometry.
/// Returns 0 for disjoint boxes and 1 for identical ones.
pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Result of matching one image's predictions against its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchAssignment {
    /// Prediction index assigned to each object; `None` for misses.
    pub prediction_for_object: BTreeMap<ObjectId, Option<usize>>,
    /// IOU for every ground-truth object; exactly 0 for unmatched objects.
    pub iou_for_object: BTreeMap<ObjectId, f64>,
    /// Predictions that passed the confidence floor but matched nothing.
    /// Predictions below the floor are discarded and do not appear here.
    pub unmatched_prediction_indices: Vec<usize>,
}

/// Matches predictions one-to-one to same-class ground-truth objects.
///
/// Predictions with confidence below `confidence_floor` are discarded. The
/// rest are processed greedily in descending confidence, each taking the
/// still-unmatched same-class object with the highest positive IOU. Ties on
/// confidence are broken toward the prediction with the higher attainable
/// IOU, then the lower prediction index; ties between equally good objects
/// go to the lower object index.
pub fn match_predictions(img: &ImageRecord, confidence_floor: f64) -> MatchAssignment {
    let mut remaining: Vec<usize> = img
        .predictions
        .iter()
        .enumerate()
        .filter(|(_, p)| p.confidence >= confidence_floor)
        .map(|(i, _)| i)
        .collect();

    let mut object_taken = vec![false; img.ground_truth.len()];
    let mut prediction_for_object: BTreeMap<ObjectId, Option<usize>> = img
        .ground_truth
        .iter()
        .map(|gt| (gt.id.clone(), None))
        .collect();
    let mut iou_for_object: BTreeMap<ObjectId, f64> = img
        .ground_truth
        .iter()
        .map(|gt| (gt.id.clone(), 0.0))
        .collect();
    let mut unmatched = Vec::new();

    while !remaining.is_empty() {
        // Best attainable assignment for each remaining prediction right now.
        let mut pick: Option<(f64, f64, usize, usize)> = None; // (conf, iou, pred, gt)
        let mut exhausted = Vec::new();
        for &pred_idx in &remaining {
            let pred = &img.predictions[pred_idx];
            let mut best: Option<(f64, usize)> = None;
            for (gt_idx, gt) in img.ground_truth.iter().enumerate() {
                if object_taken[gt_idx] || gt.class != pred.class {
                    continue;
                }
                let iou = box_iou(&pred.bbox, &gt.bbox);
                if iou > 0.0 && best.map_or(true, |(b, _)| iou > b) {
                    best = Some((iou, gt_idx));
                }
            }
            match best {
                None => exhausted.push(pred_idx),
                Some((iou, gt_idx)) => {
                    let better = match pick {
                        None => true,
                        Some((c, i, p, _)) => {
                            (pred.confidence, iou) > (c, i)
                                || ((pred.confidence, iou) == (c, i) && pred_idx < p)
                        }
                    };
                    if better {
                        pick = Some((pred.confidence, iou, pred_idx, gt_idx));
                    }
                }
            }
        }

        for pred_idx in exhausted {
            remaining.retain(|&i| i != pred_idx);
            unmatched.push(pred_idx);
        }

        let Some((_, iou, pred_idx, gt_idx)) = pick else {
            break;
        };
        object_taken[gt_idx] = true;
        let id = &img.ground_truth[gt_idx].id;
        prediction_for_object.insert(id.clone(), Some(pred_idx));
        iou_for_object.insert(id.clone(), iou);
        remaining.retain(|&i| i != pred_idx);
    }

    unmatched.sort_unstable();
    MatchAssignment {
        prediction_for_object,
        iou_for_object,
        unmatched_prediction_indices: unmatched,
    }
}

/// Per-object IOU values for a whole dataset; exactly one entry per
/// ground-truth object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerformanceTable {
    map: BTreeMap<ObjectId, f64>,
}

impl PerformanceTable {
    pub fn iou(&self, id: &ObjectId) -> Option<f64> {
        self.map.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObjectId, f64)> {
        self.map.iter().map(|(k, v)| (k, *v))
    }
}

impl FromIterator<(ObjectId, f64)> for PerformanceTable {
    fn from_iter<T: IntoIterator<Item = (ObjectId, f64)>>(iter: T) -> Self {
        PerformanceTable {
            map: iter.into_iter().collect(),
        }
    }
}

/// Computes the performance table for a dataset by matching every image.
pub fn object_performance(d: &Dataset, confidence_floor: f64) -> PerformanceTable {
    d.images
        .iter()
        .flat_map(|img| match_predictions(img, confidence_floor).iou_for_object)
        .collect()
}
