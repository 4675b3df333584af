//! Occlusion-aware multi-person pose tracking.
//!
//! The crate links per-frame person detections (box, keypoints, appearance
//! feature) into identities, trusting appearance only when the pose shows the
//! person is visible. Alongside the tracker it provides a scale-normalized
//! training sample planner, CLEAR-MOT and pose AP evaluation, and a seeded
//! scenario simulator with occlusion ground truth.
//!
//! With the default `parallel` feature, cost matrices, per-sequence
//! evaluation and scenario sweeps run on rayon; without it the same code
//! runs sequentially and produces bit-identical results.

pub mod ablation;
pub mod error;
pub mod geometry;
pub mod io;
pub mod latency;
pub mod metrics;
pub mod occlusion;
pub mod sifp;
pub mod simulator;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{iou, object_scale, BBox, Keypoint, Pose};
pub use occlusion::{count_valid_keypoints, reid_is_valid, OcclusionConfig};
pub use tracker::{Detection, ReidFeature, Tracker, TrackerConfig, Tracklet, TrackingMode};
