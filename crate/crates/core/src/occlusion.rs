//! Occlusion state from keypoint confidences and Re-ID validity gating.
//!
//! A keypoint is visible when its confidence is strictly greater than
//! `gamma_valid`. A detection's Re-ID feature is trusted only when the number
//! of visible keypoints is strictly greater than `theta_valid`, so both
//! boundary cases count as occluded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

pub const DEFAULT_NUM_KEYPOINTS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionConfig {
    /// Confidence threshold for a visible keypoint.
    pub gamma_valid: f64,
    /// Visible-keypoint count that must be exceeded for a valid feature.
    pub theta_valid: usize,
    /// Keypoints per pose.
    pub num_keypoints: usize,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self {
            gamma_valid: 0.2,
            theta_valid: 10,
            num_keypoints: DEFAULT_NUM_KEYPOINTS,
        }
    }
}

impl OcclusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma_valid) {
            return Err(Error::Config(format!(
                "gamma_valid must lie in [0, 1], got {}",
                self.gamma_valid
            )));
        }
        if self.theta_valid > self.num_keypoints {
            return Err(Error::Config(format!(
                "theta_valid ({}) exceeds num_keypoints ({})",
                self.theta_valid, self.num_keypoints
            )));
        }
        Ok(())
    }

    pub(crate) fn check_pose(&self, pose: &Pose) -> Result<()> {
        if pose.len() != self.num_keypoints {
            return Err(Error::stream(
                "keypoints",
                format!(
                    "expected {} keypoints, found {}",
                    self.num_keypoints,
                    pose.len()
                ),
            ));
        }
        Ok(())
    }
}

/// Number of keypoints whose confidence exceeds `gamma_valid`.
///
/// Non-finite confidences never count as visible.
pub fn count_valid_keypoints(pose: &Pose, cfg: &OcclusionConfig) -> Result<usize> {
    cfg.check_pose(pose)?;
    Ok(visible_count(pose, cfg.gamma_valid))
}

pub(crate) fn visible_count(pose: &Pose, gamma_valid: f64) -> usize {
    pose.keypoints
        .iter()
        .filter(|k| k.c.is_finite() && k.c > gamma_valid)
        .count()
}

/// Whether the Re-ID feature of a detection with this pose can be trusted.
pub fn reid_is_valid(pose: &Pose, cfg: &OcclusionConfig) -> Result<bool> {
    Ok(count_valid_keypoints(pose, cfg)? > cfg.theta_valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Keypoint;
    use proptest::prelude::*;

    fn pose_with(confidences: &[f64]) -> Pose {
        Pose::new(
            confidences
                .iter()
                .enumerate()
                .map(|(i, &c)| Keypoint::new(i as f64, 0.0, c))
                .collect(),
        )
    }

    fn pose_with_visible(n_visible: usize) -> Pose {
        let c: Vec<f64> = (0..15).map(|i| if i < n_visible { 0.9 } else { 0.1 }).collect();
        pose_with(&c)
    }

    #[test]
    fn all_visible_and_none_visible() {
        let cfg = OcclusionConfig::default();
        assert_eq!(count_valid_keypoints(&pose_with(&[1.0; 15]), &cfg).unwrap(), 15);
        assert_eq!(count_valid_keypoints(&pose_with(&[0.0; 15]), &cfg).unwrap(), 0);
    }

    #[test]
    fn threshold_is_strict() {
        let cfg = OcclusionConfig::default();
        assert_eq!(count_valid_keypoints(&pose_with(&[0.2; 15]), &cfg).unwrap(), 0);
        assert!(reid_is_valid(&pose_with_visible(15), &cfg).unwrap());
        assert!(reid_is_valid(&pose_with_visible(11), &cfg).unwrap());
        assert!(!reid_is_valid(&pose_with_visible(10), &cfg).unwrap());
        assert!(!reid_is_valid(&pose_with_visible(0), &cfg).unwrap());
    }

    #[test]
    fn non_finite_confidence_is_invisible() {
        let mut c = [0.9; 15];
        c[0] = f64::NAN;
        c[1] = f64::INFINITY;
        let cfg = OcclusionConfig::default();
        assert_eq!(count_valid_keypoints(&pose_with(&c), &cfg).unwrap(), 13);
    }

    #[test]
    fn wrong_pose_length_is_stream_error() {
        let err = count_valid_keypoints(&pose_with(&[1.0; 14]), &OcclusionConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("keypoints"), "{err}");
    }

    #[test]
    fn config_validation() {
        assert!(OcclusionConfig::default().validate().is_ok());
        let bad = OcclusionConfig {
            theta_valid: 16,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn count_matches_linear_scan(c in prop::collection::vec(0.0..=1.0f64, 15), gamma in 0.0..=1.0f64) {
            let cfg = OcclusionConfig { gamma_valid: gamma, ..Default::default() };
            let mut expected = 0;
            for v in &c {
                if *v > gamma {
                    expected += 1;
                }
            }
            prop_assert_eq!(count_valid_keypoints(&pose_with(&c), &cfg).unwrap(), expected);
        }

        #[test]
        fn monotone_in_gamma(c in prop::collection::vec(0.0..=1.0f64, 15), g1 in 0.0..=1.0f64, g2 in 0.0..=1.0f64) {
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let p = pose_with(&c);
            let n_lo = count_valid_keypoints(&p, &OcclusionConfig { gamma_valid: lo, ..Default::default() }).unwrap();
            let n_hi = count_valid_keypoints(&p, &OcclusionConfig { gamma_valid: hi, ..Default::default() }).unwrap();
            prop_assert!(n_hi <= n_lo);
        }

        #[test]
        fn monotone_in_theta(c in prop::collection::vec(0.0..=1.0f64, 15), t1 in 0usize..=15, t2 in 0usize..=15) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let p = pose_with(&c);
            let v_lo = reid_is_valid(&p, &OcclusionConfig { theta_valid: lo, ..Default::default() }).unwrap();
            let v_hi = reid_is_valid(&p, &OcclusionConfig { theta_valid: hi, ..Default::default() }).unwrap();
            prop_assert!(!v_hi || v_lo);
        }

        #[test]
        fn permutation_invariant(c in prop::collection::vec(0.0..=1.0f64, 15), rot in 0usize..15) {
            let cfg = OcclusionConfig::default();
            let mut shuffled = c.clone();
            shuffled.rotate_left(rot);
            shuffled.reverse();
            prop_assert_eq!(
                count_valid_keypoints(&pose_with(&c), &cfg).unwrap(),
                count_valid_keypoints(&pose_with(&shuffled), &cfg).unwrap()
            );
        }
    }
}
