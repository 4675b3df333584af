//! Scale-normalized sample planning over an image pyramid.
//!
//! For every pyramid factor the planner decides which annotated objects fall
//! in the trainable scale range once rescaled, places original-size chips so
//! that each such object lies fully inside at least one chip, and routes each
//! object to a feature pyramid level. Upscaled levels are cropped into chips;
//! downscaled levels become one chip padded to the original size. The plan
//! holds coordinates and memberships only, never pixels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{object_scale, BBox};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SifpConfig {
    /// Pyramid scaling factors.
    pub omegas: Vec<f64>,
    /// Smallest trainable rescaled object scale, inclusive.
    pub s_lower: f64,
    /// Largest trainable rescaled object scale, inclusive.
    pub s_upper: f64,
    /// Anchor areas of the five feature pyramid levels, ascending.
    pub fpn_areas: [f64; 5],
}

impl Default for SifpConfig {
    fn default() -> Self {
        Self {
            omegas: vec![2.0, 1.5, 1.0, 0.75],
            s_lower: 16.0,
            s_upper: 560.0,
            fpn_areas: [32.0 * 32.0, 64.0 * 64.0, 128.0 * 128.0, 256.0 * 256.0, 512.0 * 512.0],
        }
    }
}

impl SifpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.omegas.is_empty() || self.omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Config("omegas must be a non-empty list of positive factors".into()));
        }
        if !(self.s_lower >= 0.0 && self.s_lower < self.s_upper && self.s_upper.is_finite()) {
            return Err(Error::Config(format!(
                "scale range [{}, {}] must satisfy 0 <= s_lower < s_upper",
                self.s_lower, self.s_upper
            )));
        }
        if self.fpn_areas.iter().any(|a| !(a.is_finite() && *a > 0.0))
            || self.fpn_areas.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config("fpn_areas must be positive and strictly ascending".into()));
        }
        Ok(())
    }

    /// Object scales that are trainable at one or more pyramid factors.
    pub fn participating_range(&self) -> (f64, f64) {
        let max_w = self.omegas.iter().copied().fold(f64::MIN, f64::max);
        let min_w = self.omegas.iter().copied().fold(f64::MAX, f64::min);
        (self.s_lower / max_w, self.s_upper / min_w)
    }
}

/// Whether `b` is trainable at pyramid factor `omega`.
pub fn rescaled_valid(b: &BBox, omega: f64, cfg: &SifpConfig) -> bool {
    let s = omega * object_scale(b);
    s >= cfg.s_lower && s <= cfg.s_upper
}

/// Pyramid level (1..=5) whose anchor side is nearest to `s` in log2 space.
/// Ties go to the lower level.
pub fn assign_fpn_level(s: f64, cfg: &SifpConfig) -> u8 {
    if !(s > 0.0) {
        return 1;
    }
    let target = s.log2();
    let mut best = (1u8, f64::INFINITY);
    for (i, area) in cfg.fpn_areas.iter().enumerate() {
        let gap = (area.sqrt().log2() - target).abs();
        if gap < best.1 {
            best = (i as u8 + 1, gap);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chip {
    /// Chip rectangle in scaled-image coordinates; always original-image size.
    pub rect: BBox,
    /// Valid objects lying fully inside the chip.
    pub included: Vec<usize>,
    /// Invalid objects overlapping the chip, usable as ignore regions.
    pub excluded: Vec<usize>,
    /// Valid objects cut by the chip border (covered by another chip).
    pub truncated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPlan {
    pub omega: f64,
    /// Scaled image width and height.
    pub scaled_size: (f64, f64),
    pub chips: Vec<Chip>,
    /// Objects trainable at this factor.
    pub valid: Vec<usize>,
    /// Objects outside the scale range at this factor.
    pub invalid: Vec<usize>,
    /// FPN level per valid object, parallel to `valid`.
    pub fpn_levels: Vec<u8>,
}

impl LevelPlan {
    pub fn fpn_level_of(&self, object: usize) -> Option<u8> {
        self.valid.iter().position(|&o| o == object).map(|i| self.fpn_levels[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SifpPlan {
    pub image_width: f64,
    pub image_height: f64,
    pub levels: Vec<LevelPlan>,
    /// Objects trainable at no pyramid factor.
    pub unused: Vec<usize>,
}

/// Plans chips for one image. See the module docs.
pub fn plan(image_w: f64, image_h: f64, objects: &[BBox], cfg: &SifpConfig) -> Result<SifpPlan> {
    cfg.validate()?;
    if !(image_w > 0.0 && image_h > 0.0 && image_w.is_finite() && image_h.is_finite()) {
        return Err(Error::Planning(format!("invalid image size {image_w}x{image_h}")));
    }
    let image = BBox::new(0.0, 0.0, image_w, image_h);
    for (i, b) in objects.iter().enumerate() {
        if !b.is_valid() || !image.contains(b) {
            return Err(Error::Planning(format!("object {i} {:?} is not inside the image", b.to_array())));
        }
    }

    let mut used = vec![false; objects.len()];
    let mut levels = Vec::with_capacity(cfg.omegas.len());
    for &omega in &cfg.omegas {
        let scaled: Vec<BBox> = objects.iter().map(|b| b.scaled(omega)).collect();
        let (valid, invalid): (Vec<usize>, Vec<usize>) =
            (0..objects.len()).partition(|&i| rescaled_valid(&objects[i], omega, cfg));
        for &i in &valid {
            used[i] = true;
            let b = &scaled[i];
            if b.width() > image_w || b.height() > image_h {
                return Err(Error::Planning(format!(
                    "object {i} is {:.1}x{:.1} at factor {omega}, larger than the {image_w}x{image_h} chip",
                    b.width(),
                    b.height()
                )));
            }
        }

        let scaled_size = (image_w * omega, image_h * omega);
        let rects = if omega > 1.0 {
            cover_with_chips(&scaled, &valid, image_w, image_h, scaled_size)
        } else {
            // Downscaled image sits at the origin of an original-size canvas.
            vec![image]
        };
        let chips = rects
            .into_iter()
            .map(|rect| describe_chip(rect, &scaled, &valid, &invalid))
            .collect();
        let fpn_levels = valid
            .iter()
            .map(|&i| assign_fpn_level(object_scale(&scaled[i]), cfg))
            .collect();
        levels.push(LevelPlan {
            omega,
            scaled_size,
            chips,
            valid,
            invalid,
            fpn_levels,
        });
    }

    let unused = (0..objects.len()).filter(|&i| !used[i]).collect();
    Ok(SifpPlan {
        image_width: image_w,
        image_height: image_h,
        levels,
        unused,
    })
}

fn describe_chip(rect: BBox, scaled: &[BBox], valid: &[usize], invalid: &[usize]) -> Chip {
    let mut included = Vec::new();
    let mut truncated = Vec::new();
    for &i in valid {
        if rect.contains(&scaled[i]) {
            included.push(i);
        } else if overlaps(&rect, &scaled[i]) {
            truncated.push(i);
        }
    }
    let excluded = invalid
        .iter()
        .copied()
        .filter(|&i| overlaps(&rect, &scaled[i]))
        .collect();
    Chip {
        rect,
        included,
        excluded,
        truncated,
    }
}

fn overlaps(rect: &BBox, b: &BBox) -> bool {
    if b.area() > 0.0 {
        rect.intersection_area(b) > 0.0
    } else {
        rect.contains(b)
    }
}

/// Chip of size `chip_w` x `chip_h` centered on `anchor` and clamped into the
/// scaled image. The origin is snapped to a 1/1024 px grid when that keeps the
/// anchor inside, so that the chip extent is exactly representable.
fn chip_at(anchor: &BBox, chip_w: f64, chip_h: f64, scaled_size: (f64, f64)) -> BBox {
    let (cx, cy) = anchor.center();
    let x0 = (cx - chip_w / 2.0).clamp(0.0, scaled_size.0 - chip_w);
    let y0 = (cy - chip_h / 2.0).clamp(0.0, scaled_size.1 - chip_h);
    let snap = |v: f64| (v * 1024.0).round() / 1024.0;
    let snapped = BBox::new(snap(x0), snap(y0), snap(x0) + chip_w, snap(y0) + chip_h);
    let bounds = BBox::new(0.0, 0.0, scaled_size.0, scaled_size.1);
    if snapped.contains(anchor) && bounds.contains(&snapped) {
        snapped
    } else {
        BBox::new(x0, y0, x0 + chip_w, y0 + chip_h)
    }
}

/// Greedy cover: each round tries a chip centered on every uncovered object
/// and keeps the one that fully contains the most uncovered objects (first
/// candidate wins ties). A chip centered on an object that fits the chip
/// always contains it, so every round makes progress.
fn cover_with_chips(
    scaled: &[BBox],
    valid: &[usize],
    chip_w: f64,
    chip_h: f64,
    scaled_size: (f64, f64),
) -> Vec<BBox> {
    let mut uncovered: Vec<usize> = valid.to_vec();
    let mut chips = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(usize, BBox)> = None;
        for &anchor in &uncovered {
            let rect = chip_at(&scaled[anchor], chip_w, chip_h, scaled_size);
            let count = uncovered.iter().filter(|&&i| rect.contains(&scaled[i])).count();
            if best.as_ref().is_none_or(|(n, _)| count > *n) {
                best = Some((count, rect));
            }
        }
        let (count, rect) = best.expect("uncovered is non-empty");
        debug_assert!(count > 0);
        uncovered.retain(|&i| !rect.contains(&scaled[i]));
        chips.push(rect);
    }
    chips
}

/// Histogram of object scales over the given bin edges; values outside fall
/// into the first or last bin.
pub fn scale_histogram(scales: impl IntoIterator<Item = f64>, edges: &[f64]) -> Vec<usize> {
    let bins = edges.len().saturating_sub(1).max(1);
    let mut counts = vec![0; bins];
    for s in scales {
        let idx = edges[1..edges.len().saturating_sub(1)]
            .iter()
            .take_while(|&&e| s >= e)
            .count();
        counts[idx.min(bins - 1)] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(x: f64, y: f64, side: f64) -> BBox {
        BBox::from_xywh(x, y, side, side)
    }

    #[test]
    fn rescaled_valid_examples() {
        let cfg = SifpConfig::default();
        let s16 = square(0.0, 0.0, 16.0);
        assert!(rescaled_valid(&s16, 1.0, &cfg));
        assert!(!rescaled_valid(&s16, 0.75, &cfg));
        assert!(!rescaled_valid(&square(0.0, 0.0, 300.0), 2.0, &cfg));
        assert!(rescaled_valid(&square(0.0, 0.0, 280.0), 2.0, &cfg));
    }

    #[test]
    fn fpn_level_examples() {
        let cfg = SifpConfig::default();
        assert_eq!(assign_fpn_level(32.0, &cfg), 1);
        assert_eq!(assign_fpn_level(512.0, &cfg), 5);
        assert_eq!(assign_fpn_level(0.0, &cfg), 1);
        assert_eq!(assign_fpn_level(10_000.0, &cfg), 5);

        let to_32 = (45f64.log2() - 32f64.log2()).abs();
        let to_64 = (45f64.log2() - 64f64.log2()).abs();
        assert!(to_32 < to_64);
        assert_eq!(assign_fpn_level(45.0, &cfg), 1);
        assert_eq!(assign_fpn_level(46.0, &cfg), 2);
    }

    #[test]
    fn fpn_tie_goes_low() {
        let cfg = SifpConfig::default();
        // Geometric midpoint of 32 and 64.
        let mid = (32.0f64 * 64.0).sqrt();
        assert_eq!(assign_fpn_level(mid, &cfg), 1);
    }

    #[test]
    fn single_medium_object_valid_everywhere() {
        let cfg = SifpConfig::default();
        let p = plan(1000.0, 600.0, &[square(200.0, 200.0, 100.0)], &cfg).unwrap();
        assert_eq!(p.levels.len(), 4);
        for level in &p.levels {
            assert_eq!(level.valid, vec![0]);
            assert!(level.chips.iter().any(|c| c.included.contains(&0)));
        }
        assert!(p.unused.is_empty());
        assert_eq!(p.levels[0].fpn_level_of(0), Some(4)); // 200 px
        assert_eq!(p.levels[3].fpn_level_of(0), Some(2)); // 75 px
    }

    #[test]
    fn tiny_object_only_at_largest_factor() {
        let cfg = SifpConfig::default();
        let p = plan(1000.0, 600.0, &[square(10.0, 10.0, 8.0)], &cfg).unwrap();
        let valid_at: Vec<f64> = p.levels.iter().filter(|l| !l.valid.is_empty()).map(|l| l.omega).collect();
        assert_eq!(valid_at, vec![2.0]);
        for level in &p.levels[1..] {
            assert_eq!(level.invalid, vec![0]);
            if level.omega > 1.0 {
                assert!(level.chips.is_empty(), "nothing to crop around");
            } else {
                assert_eq!(level.chips[0].excluded, vec![0]);
            }
        }
    }

    #[test]
    fn downscaled_levels_use_one_padded_chip() {
        let cfg = SifpConfig::default();
        let p = plan(1000.0, 600.0, &[square(0.0, 0.0, 50.0)], &cfg).unwrap();
        for level in p.levels.iter().filter(|l| l.omega <= 1.0) {
            assert_eq!(level.chips.len(), 1);
            assert_eq!(level.chips[0].rect, BBox::new(0.0, 0.0, 1000.0, 600.0));
        }
    }

    #[test]
    fn oversized_valid_object_is_planning_error() {
        let cfg = SifpConfig::default();
        // s = 245 so valid at 2.0, but 1200 px wide once doubled.
        let err = plan(1000.0, 600.0, &[BBox::new(0.0, 0.0, 600.0, 100.0)], &cfg).unwrap_err();
        assert!(err.to_string().contains("object 0"), "{err}");
    }

    #[test]
    fn object_outside_image_rejected() {
        let cfg = SifpConfig::default();
        assert!(plan(100.0, 100.0, &[square(90.0, 90.0, 20.0)], &cfg).is_err());
    }

    #[test]
    fn participation_range_of_defaults() {
        let (lo, hi) = SifpConfig::default().participating_range();
        assert_eq!(lo, 8.0);
        assert!((hi - 746.666_666).abs() < 1e-3);
    }

    #[test]
    fn histogram_bins() {
        let counts = scale_histogram([1.0, 16.0, 20.0, 600.0, 10_000.0], &[0.0, 16.0, 560.0, f64::INFINITY]);
        assert_eq!(counts, vec![1, 2, 2]);
    }

    fn arb_objects() -> impl Strategy<Value = Vec<BBox>> {
        prop::collection::vec((4.0..300.0f64, 0.5..1.1f64, 0.0..1.0f64, 0.0..1.0f64), 0..30).prop_map(|specs| {
            specs
                .into_iter()
                .map(|(s, aspect, u, v)| {
                    let w = (s / aspect.sqrt()).min(1000.0);
                    let h = (s * aspect.sqrt()).min(600.0);
                    BBox::from_xywh(u * (1000.0 - w), v * (600.0 - h), w, h)
                })
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn every_valid_object_is_covered(objects in arb_objects()) {
            let cfg = SifpConfig::default();
            let p = plan(1000.0, 600.0, &objects, &cfg).unwrap();
            for level in &p.levels {
                for (i, b) in objects.iter().enumerate() {
                    let valid = rescaled_valid(b, level.omega, &cfg);
                    prop_assert_eq!(valid, level.valid.contains(&i));
                    if valid {
                        prop_assert!(level.chips.iter().any(|c| c.included.contains(&i)));
                    }
                }
                for chip in &level.chips {
                    prop_assert_eq!(chip.rect.width(), 1000.0);
                    prop_assert_eq!(chip.rect.height(), 600.0);
                    for &i in &chip.included {
                        prop_assert!(chip.rect.contains(&objects[i].scaled(level.omega)));
                    }
                }
            }
            prop_assert_eq!(&p, &plan(1000.0, 600.0, &objects, &cfg).unwrap());
        }

        #[test]
        fn fpn_level_is_monotone(a in 0.0..2000.0f64, b in 0.0..2000.0f64) {
            let cfg = SifpConfig::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(assign_fpn_level(lo, &cfg) <= assign_fpn_level(hi, &cfg));
        }
    }
}
