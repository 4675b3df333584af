//! Occlusion-aware tracking-by-detection.
//!
//! Each frame, every live tracklet is scored against every detection with
//! [`matching_cost`], pairs are selected by [`assign`], and the tracklet set is
//! updated: matched tracklets take the new box and the new appearance feature
//! (in occlusion-aware mode, only when the detection's pose says the person
//! is visible); unmatched tracklets
//! age out after `max_age` misses; unmatched detections start new tracklets.

pub mod assign;
pub mod cost;

use serde::{Deserialize, Serialize};

pub use assign::{assign, greedy, hungarian, AssignStrategy, CostMatrix};
pub use cost::{cost_matrix, cost_matrix_sequential, feature_distance, matching_cost, raw_similarity};
#[cfg(feature = "parallel")]
pub use cost::cost_matrix_parallel;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Pose};
use crate::io::{FrameObservations, TrackedDetection, TrackedFrame};
use crate::occlusion::{visible_count, OcclusionConfig};

pub const DEFAULT_REID_DIM: usize = 128;

/// Norm deviation below which a feature is taken as already unit-length.
const UNIT_NORM_SLACK: f64 = 1e-12;

/// Unit-norm appearance embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReidFeature(Vec<f64>);

impl ReidFeature {
    /// L2-normalizes `values`. Vectors already within 1e-12 of unit norm are
    /// kept bit-for-bit so that re-ingesting written streams is lossless.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::stream("reid", "non-finite feature component"));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::stream("reid", "feature has zero norm"));
        }
        if (norm - 1.0).abs() > UNIT_NORM_SLACK {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Normalized `(1 - weight) * self + weight * other`.
    pub fn blend(&self, other: &ReidFeature, weight: f64) -> Result<ReidFeature> {
        let mixed = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (1.0 - weight) * a + weight * b)
            .collect();
        ReidFeature::normalized(mixed)
    }
}

/// One person observation in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub pose: Pose,
    pub reid: ReidFeature,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    /// Positive, never reused within a run.
    pub id: u64,
    /// Box of the last matched detection.
    pub bbox: BBox,
    pub appearance: ReidFeature,
    /// Consecutive frames without a match.
    pub misses: u32,
    /// Frames alive, including the birth frame.
    pub age: u32,
    pub history: Vec<(u64, Detection)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    /// Position only.
    IouOnly,
    /// Position plus appearance for every detection.
    ReidAlways,
    /// Appearance only for detections whose pose passes the occlusion gate.
    #[default]
    OcclusionAware,
}

impl TrackingMode {
    pub const ALL: [TrackingMode; 3] = [Self::IouOnly, Self::ReidAlways, Self::OcclusionAware];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::IouOnly => "iou_only",
            Self::ReidAlways => "reid_always",
            Self::OcclusionAware => "occlusion_aware",
        }
    }
}

impl std::str::FromStr for TrackingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iou_only" => Ok(Self::IouOnly),
            "reid_always" => Ok(Self::ReidAlways),
            "occlusion_aware" => Ok(Self::OcclusionAware),
            other => Err(format!("unknown tracking mode `{other}`")),
        }
    }
}

impl std::fmt::Display for TrackingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Weight of the position term.
    pub theta_pos: f64,
    /// Distance at which the appearance term saturates.
    pub sigma_max: f64,
    pub mode: TrackingMode,
    /// Pairs costing more than this are never linked.
    pub cost_gate: f64,
    /// Tracklets are dropped after more than this many consecutive misses.
    pub max_age: u32,
    /// Detections scoring below this are discarded before tracking.
    pub min_score: f64,
    pub assignment: AssignStrategy,
    /// Weight of a new valid feature in the appearance update; 1 replaces.
    pub appearance_blend: f64,
    /// Matched detections kept per tracklet; 0 keeps all of them.
    pub history_limit: usize,
    pub occlusion: OcclusionConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            theta_pos: 0.5,
            sigma_max: 2.0,
            mode: TrackingMode::OcclusionAware,
            cost_gate: 0.7,
            max_age: 10,
            min_score: 0.0,
            assignment: AssignStrategy::Hungarian,
            appearance_blend: 1.0,
            history_limit: 0,
            occlusion: OcclusionConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.theta_pos) {
            return Err(Error::Config(format!("theta_pos must lie in [0, 1], got {}", self.theta_pos)));
        }
        if !(self.sigma_max > 0.0 && self.sigma_max.is_finite()) {
            return Err(Error::Config(format!("sigma_max must be positive, got {}", self.sigma_max)));
        }
        if !in_unit(self.cost_gate) {
            return Err(Error::Config(format!("cost_gate must lie in [0, 1], got {}", self.cost_gate)));
        }
        if !(self.appearance_blend > 0.0 && self.appearance_blend <= 1.0) {
            return Err(Error::Config(format!(
                "appearance_blend must lie in (0, 1], got {}",
                self.appearance_blend
            )));
        }
        if !self.min_score.is_finite() {
            return Err(Error::Config("min_score must be finite".into()));
        }
        self.occlusion.validate()
    }
}

/// Tracker state for one sequence. Single-writer: frames go through
/// [`Tracker::step`] in order.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracklets: Vec<Tracklet>,
    next_id: u64,
    reid_dim: Option<usize>,
    last_frame: Option<u64>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracklets: Vec::new(),
            next_id: 1,
            reid_dim: None,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live tracklets, ordered by id.
    pub fn tracklets(&self) -> &[Tracklet] {
        &self.tracklets
    }

    fn validate_frame(&self, frame: &FrameObservations) -> Result<Option<usize>> {
        if let Some(last) = self.last_frame {
            if frame.frame <= last {
                return Err(Error::stream(
                    "frame",
                    format!("frame index {} does not follow {}", frame.frame, last),
                ));
            }
        }
        let mut dim = self.reid_dim;
        for det in &frame.detections {
            if !det.bbox.is_valid() {
                return Err(Error::stream("box", format!("invalid box {:?}", det.bbox.to_array())));
            }
            self.cfg.occlusion.check_pose(&det.pose)?;
            match dim {
                None => dim = Some(det.reid.dim()),
                Some(d) if d != det.reid.dim() => {
                    return Err(Error::stream(
                        "reid",
                        format!("feature dimension mismatch: expected {d}, found {}", det.reid.dim()),
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(dim)
    }

    /// Only the occlusion-aware mode withholds occluded features from the
    /// tracklet appearance; the other modes take every matched feature.
    fn updates_appearance(&self, det: &Detection) -> bool {
        match self.cfg.mode {
            TrackingMode::OcclusionAware => {
                visible_count(&det.pose, self.cfg.occlusion.gamma_valid) > self.cfg.occlusion.theta_valid
            }
            TrackingMode::IouOnly | TrackingMode::ReidAlways => true,
        }
    }

    /// Advances the tracker by one frame. On error the state is unchanged.
    pub fn step(&mut self, frame: FrameObservations) -> Result<TrackedFrame> {
        let dim = self.validate_frame(&frame)?;
        let FrameObservations {
            seq,
            frame: frame_index,
            detections,
        } = frame;
        let detections: Vec<Detection> = detections
            .into_iter()
            .filter(|d| d.score >= self.cfg.min_score)
            .collect();

        let costs = cost_matrix(&self.tracklets, &detections, &self.cfg);
        let pairs = assign(&costs, self.cfg.cost_gate, self.cfg.assignment);

        let mut det_owner: Vec<Option<u64>> = vec![None; detections.len()];
        let mut matched = vec![false; self.tracklets.len()];
        for &(t, d) in &pairs {
            matched[t] = true;
            det_owner[d] = Some(self.tracklets[t].id);
            let det = &detections[d];
            let refresh = self.updates_appearance(det);
            let track = &mut self.tracklets[t];
            track.bbox = det.bbox;
            track.misses = 0;
            if refresh {
                track.appearance = if self.cfg.appearance_blend >= 1.0 {
                    det.reid.clone()
                } else {
                    // An exactly cancelling blend has no direction; take the new feature.
                    track
                        .appearance
                        .blend(&det.reid, self.cfg.appearance_blend)
                        .unwrap_or_else(|_| det.reid.clone())
                };
            }
            push_history(track, frame_index, det.clone(), self.cfg.history_limit);
        }

        for (track, was_matched) in self.tracklets.iter_mut().zip(&matched) {
            track.age += 1;
            if !was_matched {
                track.misses += 1;
            }
        }
        let max_age = self.cfg.max_age;
        self.tracklets.retain(|t| t.misses <= max_age);

        for (d, owner) in det_owner.iter_mut().enumerate() {
            if owner.is_some() {
                continue;
            }
            let det = &detections[d];
            let id = self.next_id;
            self.next_id += 1;
            let mut track = Tracklet {
                id,
                bbox: det.bbox,
                appearance: det.reid.clone(),
                misses: 0,
                age: 1,
                history: Vec::new(),
            };
            push_history(&mut track, frame_index, det.clone(), self.cfg.history_limit);
            self.tracklets.push(track);
            *owner = Some(id);
        }

        self.reid_dim = dim;
        self.last_frame = Some(frame_index);

        let tracks = detections
            .into_iter()
            .zip(det_owner)
            .map(|(detection, owner)| TrackedDetection {
                id: owner.expect("every detection is matched or spawned"),
                detection,
                occluded: None,
            })
            .collect();
        Ok(TrackedFrame {
            seq,
            frame: frame_index,
            tracks,
        })
    }
}

fn push_history(track: &mut Tracklet, frame: u64, det: Detection, limit: usize) {
    track.history.push((frame, det));
    if limit > 0 && track.history.len() > limit {
        let excess = track.history.len() - limit;
        track.history.drain(..excess);
    }
}
