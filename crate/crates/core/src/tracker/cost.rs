//! Position/appearance cost between tracklets and detections.

use super::{Detection, ReidFeature, TrackerConfig, TrackingMode, Tracklet};
use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::occlusion::visible_count;
use crate::tracker::assign::CostMatrix;

/// Euclidean distance between two Re-ID features.
pub fn feature_distance(a: &ReidFeature, b: &ReidFeature) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::stream(
            "reid",
            format!("feature dimension mismatch: {} vs {}", a.dim(), b.dim()),
        ));
    }
    Ok(euclidean(a.as_slice(), b.as_slice()))
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The integrated metric exactly as printed: a weighted IoU plus a weighted,
/// clipped and normalized feature distance.
///
/// The two addends point in opposite directions (high IoU is good, high
/// distance is bad), so the tracker never ranks pairs by this value. It is
/// kept for audit against [`matching_cost`].
pub fn raw_similarity(iou: f64, dist: f64, cfg: &TrackerConfig) -> f64 {
    cfg.theta_pos * iou + (1.0 - cfg.theta_pos) * normalized_distance(dist, cfg.sigma_max)
}

#[inline]
fn normalized_distance(dist: f64, sigma_max: f64) -> f64 {
    dist.min(sigma_max) / sigma_max
}

/// Cost of linking `detection` to `track`, in `[0, 1]` for unit features.
///
/// `theta_pos * (1 - IoU) + (1 - theta_pos) * appearance`, where the
/// appearance addend is the normalized feature distance, or `1 - IoU` when the
/// mode ignores appearance or the detection's feature is gated out.
pub fn matching_cost(track: &Tracklet, detection: &Detection, cfg: &TrackerConfig) -> Result<f64> {
    let use_appearance = match cfg.mode {
        TrackingMode::IouOnly => false,
        TrackingMode::ReidAlways => true,
        TrackingMode::OcclusionAware => {
            crate::occlusion::reid_is_valid(&detection.pose, &cfg.occlusion)?
        }
    };
    let dist = if use_appearance {
        Some(feature_distance(&detection.reid, &track.appearance)?)
    } else {
        None
    };
    Ok(combine(iou(&track.bbox, &detection.bbox), dist, cfg))
}

#[inline]
fn combine(iou: f64, dist: Option<f64>, cfg: &TrackerConfig) -> f64 {
    let position = 1.0 - iou;
    let appearance = match dist {
        Some(d) => normalized_distance(d, cfg.sigma_max),
        None => position,
    };
    cfg.theta_pos * position + (1.0 - cfg.theta_pos) * appearance
}

/// Per-detection flags: whether its appearance participates in the cost.
pub(crate) fn appearance_mask(detections: &[Detection], cfg: &TrackerConfig) -> Vec<bool> {
    detections
        .iter()
        .map(|d| match cfg.mode {
            TrackingMode::IouOnly => false,
            TrackingMode::ReidAlways => true,
            TrackingMode::OcclusionAware => {
                visible_count(&d.pose, cfg.occlusion.gamma_valid) > cfg.occlusion.theta_valid
            }
        })
        .collect()
}

#[inline]
fn row_costs(
    track: &Tracklet,
    detections: &[Detection],
    mask: &[bool],
    cfg: &TrackerConfig,
    out: &mut [f64],
) {
    for ((slot, det), &use_app) in out.iter_mut().zip(detections).zip(mask) {
        let dist = use_app.then(|| euclidean(det.reid.as_slice(), track.appearance.as_slice()));
        *slot = combine(iou(&track.bbox, &det.bbox), dist, cfg);
    }
}

/// Builds the tracklet x detection cost matrix on the calling thread.
///
/// Inputs must already be validated (pose lengths and feature dimensions).
pub fn cost_matrix_sequential(
    tracks: &[Tracklet],
    detections: &[Detection],
    cfg: &TrackerConfig,
) -> CostMatrix {
    let mask = appearance_mask(detections, cfg);
    let cols = detections.len();
    let mut data = vec![0.0; tracks.len() * cols];
    if cols > 0 {
        for (track, out) in tracks.iter().zip(data.chunks_mut(cols)) {
            row_costs(track, detections, &mask, cfg, out);
        }
    }
    CostMatrix::new(tracks.len(), cols, data)
}

/// Same as [`cost_matrix_sequential`], with rows computed on the rayon pool.
/// Each entry is computed identically, so the result is bit-identical.
#[cfg(feature = "parallel")]
pub fn cost_matrix_parallel(
    tracks: &[Tracklet],
    detections: &[Detection],
    cfg: &TrackerConfig,
) -> CostMatrix {
    use rayon::prelude::*;

    let mask = appearance_mask(detections, cfg);
    let cols = detections.len();
    let mut data = vec![0.0; tracks.len() * cols];
    if cols > 0 {
        data.par_chunks_mut(cols)
            .zip(tracks.par_iter())
            .with_min_len(4)
            .for_each(|(out, track)| row_costs(track, detections, &mask, cfg, out));
    }
    CostMatrix::new(tracks.len(), cols, data)
}

/// Builds the cost matrix, in parallel when the `parallel` feature is on.
pub fn cost_matrix(tracks: &[Tracklet], detections: &[Detection], cfg: &TrackerConfig) -> CostMatrix {
    #[cfg(feature = "parallel")]
    {
        cost_matrix_parallel(tracks, detections, cfg)
    }
    #[cfg(not(feature = "parallel"))]
    {
        cost_matrix_sequential(tracks, detections, cfg)
    }
}
