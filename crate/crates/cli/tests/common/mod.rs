//! Independent brute-force implementations used to cross-check the library:
//! per-pixel patch rasterization, naive greedy matching, a CDF-integral
//! Wasserstein oracle, and a from-scratch run of the whole comparison loop.
//! Nothing here calls into the library's fast paths.

use std::collections::BTreeMap;

use contextval::{BoundingBox, Dataset, ImageRecord, PatchSpec};

/// (image_id, index) key mirroring the library's object identity.
pub type Key = (String, u32);

/// Per-pixel occupancy grid of an object-centered patch: a pixel is set iff
/// its center lies inside some same-class ground-truth box, clipped to the
/// image.
pub fn grid_mask(img: &ImageRecord, owner_index: usize, spec: PatchSpec) -> Vec<Vec<bool>> {
    let owner = &img.ground_truth[owner_index];
    let (cx, cy) = owner.bbox.center();
    let ax = cx.floor() as i64;
    let ay = cy.floor() as i64;
    let mut grid = vec![vec![false; spec.w() as usize]; spec.h() as usize];
    for py in 0..spec.h() as i64 {
        for px in 0..spec.w() as i64 {
            let ix = px - (spec.w() / 2) as i64 + ax;
            let iy = py - (spec.h() / 2) as i64 + ay;
            if ix < 0 || iy < 0 || ix >= img.width as i64 || iy >= img.height as i64 {
                continue;
            }
            let (center_x, center_y) = (ix as f64 + 0.5, iy as f64 + 0.5);
            let covered = img.ground_truth.iter().any(|g| {
                g.class == owner.class
                    && center_x >= g.bbox.x_min
                    && center_x < g.bbox.x_max
                    && center_y >= g.bbox.y_min
                    && center_y < g.bbox.y_max
            });
            if covered {
                grid[py as usize][px as usize] = true;
            }
        }
    }
    grid
}

/// IOU of two occupancy grids by counting pixels.
pub fn grid_similarity(p: &[Vec<bool>], q: &[Vec<bool>]) -> f64 {
    let mut inter = 0u64;
    let mut union = 0u64;
    for (row_p, row_q) in p.iter().zip(q) {
        for (&a, &b) in row_p.iter().zip(row_q) {
            if a && b {
                inter += 1;
            }
            if a || b {
                union += 1;
            }
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn area_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let area = |r: &BoundingBox| (r.x_max - r.x_min) * (r.y_max - r.y_min);
    inter / (area(a) + area(b) - inter)
}

/// Naive greedy matcher: repeatedly commit the best remaining
/// (confidence, iou) pairing of equal classes.
pub fn greedy_match(img: &ImageRecord, floor: f64) -> BTreeMap<Key, f64> {
    let mut out: BTreeMap<Key, f64> = img
        .ground_truth
        .iter()
        .map(|g| ((g.id.image_id().to_string(), g.id.index()), 0.0))
        .collect();
    let mut used_pred = vec![false; img.predictions.len()];
    let mut used_gt = vec![false; img.ground_truth.len()];
    loop {
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for (pi, p) in img.predictions.iter().enumerate() {
            if used_pred[pi] || p.confidence < floor {
                continue;
            }
            for (gi, g) in img.ground_truth.iter().enumerate() {
                if used_gt[gi] || g.class != p.class {
                    continue;
                }
                let iou = area_iou(&p.bbox, &g.bbox);
                if iou <= 0.0 {
                    continue;
                }
                let replace = match best {
                    None => true,
                    Some((c, i, bpi, bgi)) => {
                        (p.confidence, iou) > (c, i)
                            || ((p.confidence, iou) == (c, i) && (pi, gi) < (bpi, bgi))
                    }
                };
                if replace {
                    best = Some((p.confidence, iou, pi, gi));
                }
            }
        }
        match best {
            None => break,
            Some((_, iou, pi, gi)) => {
                used_pred[pi] = true;
                used_gt[gi] = true;
                let id = &img.ground_truth[gi].id;
                out.insert((id.image_id().to_string(), id.index()), iou);
            }
        }
    }
    out
}

/// W1 as the integral of |F_a - F_b| over the merged value breakpoints — a
/// different algebraic route than the library's quantile walk.
pub fn w1_cdf_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(!xs.is_empty() && !ys.is_empty());
    let mut cuts: Vec<f64> = xs.iter().chain(ys).copied().collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let cdf = |values: &[f64], x: f64| {
        values.iter().filter(|&&v| v <= x).count() as f64 / values.len() as f64
    };
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        total += (cdf(xs, pair[0]) - cdf(ys, pair[0])).abs() * (pair[1] - pair[0]);
    }
    total
}

/// One batch produced by the brute-force loop.
pub struct BruteBatch {
    pub reference: Key,
    pub members_a: Vec<Key>,
    pub members_b: Vec<Key>,
    pub w1: f64,
    pub m_diff: f64,
}

/// Per-class outcome of the brute-force comparison.
pub struct BruteClassResult {
    pub class_id: u32,
    pub contexts_a: usize,
    pub contexts_b: usize,
    pub batches: Vec<BruteBatch>,
    pub w1_mean: Option<f64>,
    pub m_diff_mean: Option<f64>,
    pub overlap_a: Vec<Key>,
    pub overlap_b: Vec<Key>,
    pub no_overlap_a: Vec<Key>,
    pub no_overlap_b: Vec<Key>,
    pub fraction_a: f64,
    pub fraction_b: f64,
    pub mean_size_a: Option<f64>,
    pub mean_size_b: Option<f64>,
}

struct BruteObject {
    key: Key,
    grid: Vec<Vec<bool>>,
    iou: f64,
}

fn brute_objects(d: &Dataset, class_id: u32, spec: PatchSpec, floor: f64) -> Vec<BruteObject> {
    let mut perf: BTreeMap<Key, f64> = BTreeMap::new();
    for img in &d.images {
        perf.extend(greedy_match(img, floor));
    }
    let mut objects = Vec::new();
    for img in &d.images {
        for (gi, g) in img.ground_truth.iter().enumerate() {
            if g.class.0 != class_id {
                continue;
            }
            let key = (g.id.image_id().to_string(), g.id.index());
            objects.push(BruteObject {
                iou: perf[&key],
                grid: grid_mask(img, gi, spec),
                key,
            });
        }
    }
    objects.sort_by(|a, b| a.key.cmp(&b.key));
    objects
}

/// From-scratch run of the comparison: all-pairs grid similarities, naive
/// matching, CDF-oracle W1, and plain set unions.
pub fn brute_compare(
    a: &Dataset,
    b: &Dataset,
    theta: f64,
    spec: PatchSpec,
    min_batch: usize,
    floor: f64,
) -> Vec<BruteClassResult> {
    let threshold = theta - 1e-9;
    a.class_table
        .iter()
        .map(|class| {
            let objs_a = brute_objects(a, class.id.0, spec, floor);
            let objs_b = brute_objects(b, class.id.0, spec, floor);

            let mut batches = Vec::new();
            for reference in &objs_a {
                let members_a: Vec<&BruteObject> = objs_a
                    .iter()
                    .filter(|o| grid_similarity(&reference.grid, &o.grid) >= threshold)
                    .collect();
                let members_b: Vec<&BruteObject> = objs_b
                    .iter()
                    .filter(|o| grid_similarity(&reference.grid, &o.grid) >= threshold)
                    .collect();
                if members_b.is_empty() || members_a.len() < min_batch || members_b.len() < min_batch
                {
                    continue;
                }
                let ious_a: Vec<f64> = members_a.iter().map(|o| o.iou).collect();
                let ious_b: Vec<f64> = members_b.iter().map(|o| o.iou).collect();
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                batches.push(BruteBatch {
                    reference: reference.key.clone(),
                    members_a: members_a.iter().map(|o| o.key.clone()).collect(),
                    members_b: members_b.iter().map(|o| o.key.clone()).collect(),
                    w1: w1_cdf_oracle(&ious_a, &ious_b),
                    m_diff: (mean(&ious_a) - mean(&ious_b)).abs(),
                });
            }

            let mut overlap_a: Vec<Key> = Vec::new();
            let mut overlap_b: Vec<Key> = Vec::new();
            for batch in &batches {
                overlap_a.extend(batch.members_a.iter().cloned());
                overlap_b.extend(batch.members_b.iter().cloned());
            }
            overlap_a.sort();
            overlap_a.dedup();
            overlap_b.sort();
            overlap_b.dedup();
            let no_overlap_a: Vec<Key> = objs_a
                .iter()
                .map(|o| o.key.clone())
                .filter(|k| !overlap_a.contains(k))
                .collect();
            let no_overlap_b: Vec<Key> = objs_b
                .iter()
                .map(|o| o.key.clone())
                .filter(|k| !overlap_b.contains(k))
                .collect();

            let list_mean = |v: &[f64]| {
                if v.is_empty() {
                    None
                } else {
                    Some(v.iter().sum::<f64>() / v.len() as f64)
                }
            };
            let w1_list: Vec<f64> = batches.iter().map(|b| b.w1).collect();
            let m_diff_list: Vec<f64> = batches.iter().map(|b| b.m_diff).collect();
            let size_mean = |take: fn(&BruteBatch) -> usize| {
                if batches.is_empty() {
                    None
                } else {
                    Some(
                        batches.iter().map(take).sum::<usize>() as f64 / batches.len() as f64,
                    )
                }
            };
            let fraction = |part: usize, whole: usize| {
                if whole == 0 {
                    0.0
                } else {
                    part as f64 / whole as f64
                }
            };

            BruteClassResult {
                class_id: class.id.0,
                contexts_a: objs_a.len(),
                contexts_b: objs_b.len(),
                w1_mean: list_mean(&w1_list),
                m_diff_mean: list_mean(&m_diff_list),
                fraction_a: fraction(overlap_a.len(), objs_a.len()),
                fraction_b: fraction(overlap_b.len(), objs_b.len()),
                mean_size_a: size_mean(|b| b.members_a.len()),
                mean_size_b: size_mean(|b| b.members_b.len()),
                overlap_a,
                overlap_b,
                no_overlap_a,
                no_overlap_b,
                batches,
            }
        })
        .collect()
}

/// Converts library object ids to oracle keys.
pub fn keys(ids: &[contextval::ObjectId]) -> Vec<Key> {
    ids.iter()
        .map(|id| (id.image_id().to_string(), id.index()))
        .collect()
}
