//! Object-centered ground-truth patches and their similarity factor.
//!
//! The context of an object is the ground-truth occupancy of an `h x w`
//! pixel patch anchored at the object's center. Two contexts are compared by
//! the IOU of their occupancy masks, evaluated in exact integer arithmetic
//! on the patch grid. Masks include only boxes of the owner's class; the
//! whole pipeline is partitioned per class.
//!
//! Rasterization convention: a pixel is occupied iff its center lies inside
//! a box, with the half-open rule `min <= center < max` per axis. Pixel `i`
//! has its center at `i + 0.5`, so a box `[lo, hi)` covers the integer span
//! `ceil(lo - 0.5) .. ceil(hi - 0.5)`. Pixels outside the source image are
//! never occupied.

use std::fmt;
use std::str::FromStr;

use crate::dataset::{Dataset, GroundTruthObject, ImageRecord, ObjectId};
use crate::error::{Error, Result};

/// Absolute slack applied to the similarity threshold so that batch
/// membership does not flap on float boundaries.
pub const THETA_TOLERANCE: f64 = 1e-9;

/// Height and width of the context patch in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchSpec {
    h: u32,
    w: u32,
}

impl PatchSpec {
    pub const MAX_SIDE: u32 = 4096;

    pub fn new(h: u32, w: u32) -> Result<Self> {
        if h == 0 || w == 0 || h > Self::MAX_SIDE || w > Self::MAX_SIDE {
            return Err(Error::InvalidConfig(format!(
                "patch sides must be in 1..={}, got {h}x{w}",
                Self::MAX_SIDE
            )));
        }
        Ok(PatchSpec { h, w })
    }

    /// Square patch, the common case.
    pub fn square(side: u32) -> Result<Self> {
        Self::new(side, side)
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn w(&self) -> u32 {
        self.w
    }
}

impl fmt::Display for PatchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.h, self.w)
    }
}

impl FromStr for PatchSpec {
    type Err = Error;

    /// Parses `"HxW"`, e.g. `120x120`.
    fn from_str(s: &str) -> Result<Self> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::InvalidConfig(format!("patch spec '{s}' is not HxW")))?;
        let h: u32 = h
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad patch height in '{s}'")))?;
        let w: u32 = w
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad patch width in '{s}'")))?;
        PatchSpec::new(h, w)
    }
}

/// Binary ground-truth occupancy of one object-centered patch.
///
/// Bits are stored row-major in 64-bit words; set-algebra on masks reduces
/// to word-wise AND/OR popcounts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchMask {
    owner: ObjectId,
    spec: PatchSpec,
    words: Vec<u64>,
    ones: u64,
}

impl PatchMask {
    pub fn owner(&self) -> &ObjectId {
        &self.owner
    }

    pub fn spec(&self) -> PatchSpec {
        self.spec
    }

    /// Number of occupied pixels.
    pub fn occupancy_count(&self) -> u64 {
        self.ones
    }

    /// Whether patch pixel (x, y) is occupied. Intended for tests and
    /// cross-checking against per-pixel rasterizers.
    pub fn is_set(&self, x: u32, y: u32) -> bool {
        assert!(x < self.spec.w && y < self.spec.h);
        let bit = y as usize * self.spec.w as usize + x as usize;
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    fn zeroed(owner: ObjectId, spec: PatchSpec) -> Self {
        let bits = spec.h as usize * spec.w as usize;
        PatchMask {
            owner,
            spec,
            words: vec![0; bits.div_ceil(64)],
            ones: 0,
        }
    }

    /// Sets bits `[start, end)` of the flat row-major grid.
    fn set_bit_range(&mut self, start: usize, end: usize) {
        let mut bit = start;
        while bit < end {
            let word = bit / 64;
            let offset = bit % 64;
            let take = (64 - offset).min(end - bit);
            let mask = if take == 64 {
                u64::MAX
            } else {
                ((1u64 << take) - 1) << offset
            };
            self.words[word] |= mask;
            bit += take;
        }
    }

    fn finish(&mut self) {
        self.ones = self.words.iter().map(|w| w.count_ones() as u64).sum();
    }
}

/// Integer pixel span `[lo, hi)` covered by the continuous interval
/// `[lo_f, hi_f)` under the pixel-center rule.
fn pixel_span(lo_f: f64, hi_f: f64) -> (i64, i64) {
    (((lo_f - 0.5).ceil()) as i64, ((hi_f - 0.5).ceil()) as i64)
}

/// Builds the occupancy mask for one object given its owning image.
pub(crate) fn mask_for(img: &ImageRecord, owner: &GroundTruthObject, spec: PatchSpec) -> PatchMask {
    let mut mask = PatchMask::zeroed(owner.id.clone(), spec);

    // Anchor pixel: the image pixel containing the owner's box center. The
    // patch places it at (w/2, h/2); sub-pixel offsets are discarded.
    let (cx, cy) = owner.bbox.center();
    let ax = cx.floor() as i64;
    let ay = cy.floor() as i64;
    let dx = (spec.w / 2) as i64 - ax;
    let dy = (spec.h / 2) as i64 - ay;

    let (img_w, img_h) = (img.width as f64, img.height as f64);
    for gt in &img.ground_truth {
        if gt.class != owner.class {
            continue;
        }
        // Clip to the image first: out-of-image regions are empty by definition.
        let x0 = gt.bbox.x_min.max(0.0);
        let x1 = gt.bbox.x_max.min(img_w);
        let y0 = gt.bbox.y_min.max(0.0);
        let y1 = gt.bbox.y_max.min(img_h);
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        let (sx0, sx1) = pixel_span(x0, x1);
        let (sy0, sy1) = pixel_span(y0, y1);
        // Translate into patch coordinates and clip to the patch.
        let px0 = (sx0 + dx).clamp(0, spec.w as i64) as usize;
        let px1 = (sx1 + dx).clamp(0, spec.w as i64) as usize;
        let py0 = (sy0 + dy).clamp(0, spec.h as i64) as usize;
        let py1 = (sy1 + dy).clamp(0, spec.h as i64) as usize;
        if px0 >= px1 {
            continue;
        }
        for y in py0..py1 {
            let row = y * spec.w as usize;
            mask.set_bit_range(row + px0, row + px1);
        }
    }

    mask.finish();
    mask
}

/// Extracts the context mask of `object_id` from a dataset.
pub fn extract_patch_mask(d: &Dataset, object_id: &ObjectId, spec: PatchSpec) -> Result<PatchMask> {
    let (img, gt) = d
        .find_object(object_id)
        .ok_or_else(|| Error::UnknownObject(object_id.clone()))?;
    Ok(mask_for(img, gt, spec))
}

/// Intersection and union pixel counts of two masks of the same spec.
pub(crate) fn mask_counts(p: &PatchMask, q: &PatchMask) -> (u64, u64) {
    debug_assert_eq!(p.spec, q.spec);
    let mut inter = 0u64;
    let mut union = 0u64;
    for (a, b) in p.words.iter().zip(&q.words) {
        inter += (a & b).count_ones() as u64;
        union += (a | b).count_ones() as u64;
    }
    (inter, union)
}

pub(crate) fn similarity_unchecked(p: &PatchMask, q: &PatchMask) -> f64 {
    let (inter, union) = mask_counts(p, q);
    if union == 0 {
        // Two empty patches have identical (empty) contexts.
        return 1.0;
    }
    inter as f64 / union as f64
}

/// Similarity factor between two contexts: IOU of their occupancy masks.
/// Symmetric, 1 for identical masks, 0 for disjoint ones.
pub fn similarity(p: &PatchMask, q: &PatchMask) -> Result<f64> {
    if p.spec != q.spec {
        return Err(Error::PatchSpecMismatch {
            a: p.spec,
            b: q.spec,
        });
    }
    Ok(similarity_unchecked(p, q))
}

/// Collects every object in `pool` of the reference's class whose context
/// similarity to the reference is at least `theta` (minus
/// [`THETA_TOLERANCE`]). The reference itself qualifies whenever it is part
/// of the pool, since S(c, c) = 1. Results are sorted by object id.
pub fn build_batch(
    reference_dataset: &Dataset,
    reference: &ObjectId,
    pool: &Dataset,
    theta: f64,
    spec: PatchSpec,
) -> Result<Vec<ObjectId>> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidConfig(format!(
            "theta must be in [0, 1], got {theta}"
        )));
    }
    let (ref_img, ref_gt) = reference_dataset
        .find_object(reference)
        .ok_or_else(|| Error::UnknownObject(reference.clone()))?;
    let ref_mask = mask_for(ref_img, ref_gt, spec);

    let mut members = Vec::new();
    for (img, gt) in pool.objects() {
        if gt.class != ref_gt.class {
            continue;
        }
        let mask = mask_for(img, gt, spec);
        if similarity_unchecked(&ref_mask, &mask) >= theta - THETA_TOLERANCE {
            members.push(gt.id.clone());
        }
    }
    members.sort();
    Ok(members)
}
