//! Deterministic multi-person scenarios with occlusion ground truth.
//!
//! People move at constant velocity and bounce off the arena walls. Each
//! identity owns a fixed random unit appearance vector. Lower ids stand
//! nearer the camera: a person is occluded in a frame when a lower-id person's
//! box overlaps theirs by more than `occlusion_iou_threshold` IoU. Occluded
//! detections get keypoint confidences at most `occluded_confidence_ceiling`
//! and a feature pulled toward the occluder's identity vector.
//!
//! Randomness comes from xoshiro256++ seeded through SplitMix64
//! (`seed_from_u64`). Uniform reals take the top 53 bits of a draw, normals use
//! the Box-Muller transform on two uniforms, and all draws happen in a fixed
//! order, so a seed reproduces a scenario exactly on any platform.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, Keypoint, Pose};
use crate::io::{FrameObservations, StreamSchema, TrackedDetection, TrackedFrame};
use crate::tracker::{Detection, ReidFeature};

/// Joint positions as fractions of the box, 15-joint PoseTrack order:
/// right ankle, knee, hip; left hip, knee, ankle; right wrist, elbow,
/// shoulder; left shoulder, elbow, wrist; head bottom, nose, head top.
const POSE_TEMPLATE: [(f64, f64); 15] = [
    (0.35, 0.97),
    (0.37, 0.76),
    (0.40, 0.55),
    (0.60, 0.55),
    (0.63, 0.76),
    (0.65, 0.97),
    (0.15, 0.52),
    (0.20, 0.38),
    (0.30, 0.24),
    (0.70, 0.24),
    (0.80, 0.38),
    (0.85, 0.52),
    (0.50, 0.18),
    (0.50, 0.10),
    (0.50, 0.02),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Uniform start positions and headings.
    #[default]
    Random,
    /// People start on alternating sides of a central band and walk toward
    /// each other, so paths cross repeatedly.
    Crossing,
}

impl std::str::FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Self::Random),
            "crossing" => Ok(Self::Crossing),
            other => Err(format!("unknown layout `{other}`")),
        }
    }
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::Crossing => "crossing",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub sequence: String,
    pub n_persons: usize,
    pub n_frames: usize,
    pub arena_w: f64,
    pub arena_h: f64,
    pub layout: Layout,
    /// Speed range in pixels per frame.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Person box width range; height is `aspect` times the width.
    pub box_w_min: f64,
    pub box_w_max: f64,
    pub aspect: f64,
    pub occlusion_iou_threshold: f64,
    pub reid_noise_sigma: f64,
    pub occluded_confidence_ceiling: f64,
    pub occluded_feature_blend: f64,
    /// Probability per frame of one spurious detection.
    pub detector_fp_rate: f64,
    /// Probability per person and frame of a missed detection.
    pub detector_fn_rate: f64,
    /// Standard deviation of detected box corners, pixels.
    pub box_jitter: f64,
    /// Standard deviation of detected keypoints, pixels.
    pub keypoint_jitter: f64,
    pub num_keypoints: usize,
    pub reid_dim: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sequence: "sim".into(),
            n_persons: 6,
            n_frames: 300,
            arena_w: 1000.0,
            arena_h: 600.0,
            layout: Layout::Random,
            speed_min: 2.0,
            speed_max: 8.0,
            box_w_min: 40.0,
            box_w_max: 60.0,
            aspect: 2.5,
            occlusion_iou_threshold: 0.3,
            reid_noise_sigma: 0.05,
            occluded_confidence_ceiling: 0.15,
            occluded_feature_blend: 0.7,
            detector_fp_rate: 0.0,
            detector_fn_rate: 0.0,
            box_jitter: 1.0,
            keypoint_jitter: 1.0,
            num_keypoints: POSE_TEMPLATE.len(),
            reid_dim: crate::tracker::DEFAULT_REID_DIM,
        }
    }
}

impl ScenarioConfig {
    /// The crossing-paths scenario used for tracking ablations.
    pub fn crossing(seed: u64) -> Self {
        Self {
            seed,
            sequence: format!("crossing-{seed}"),
            layout: Layout::Crossing,
            detector_fp_rate: 0.05,
            detector_fn_rate: 0.02,
            ..Self::default()
        }
    }

    pub fn schema(&self) -> StreamSchema {
        StreamSchema {
            num_keypoints: self.num_keypoints,
            reid_dim: self.reid_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("occlusion_iou_threshold", self.occlusion_iou_threshold)?;
        unit("occluded_confidence_ceiling", self.occluded_confidence_ceiling)?;
        unit("occluded_feature_blend", self.occluded_feature_blend)?;
        unit("detector_fp_rate", self.detector_fp_rate)?;
        unit("detector_fn_rate", self.detector_fn_rate)?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("box_w_min", self.box_w_min)?;
        positive("aspect", self.aspect)?;
        if self.box_w_max < self.box_w_min || self.speed_max < self.speed_min || self.speed_min < 0.0 {
            return Err(Error::Config("ranges must satisfy min <= max and speeds >= 0".into()));
        }
        if self.box_w_max >= self.arena_w || self.box_w_max * self.aspect >= self.arena_h {
            return Err(Error::Config("person boxes must fit inside the arena".into()));
        }
        if !(self.reid_noise_sigma >= 0.0 && self.keypoint_jitter >= 0.0 && self.box_jitter >= 0.0) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        if self.num_keypoints != POSE_TEMPLATE.len() {
            return Err(Error::Config(format!(
                "the simulator's pose template has {} keypoints",
                POSE_TEMPLATE.len()
            )));
        }
        if self.reid_dim == 0 {
            return Err(Error::Config("reid_dim must be positive".into()));
        }
        Ok(())
    }
}

/// Portable random source for scenarios.
#[derive(Debug, Clone)]
pub struct ScenarioRng(Xoshiro256PlusPlus);

impl ScenarioRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller; consumes two uniforms per call.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn unit_vector(&mut self, dim: usize) -> ReidFeature {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.normal()).collect();
            if let Ok(f) = ReidFeature::normalized(v) {
                return f;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone)]
struct Walker {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    w: f64,
    h: f64,
    identity: ReidFeature,
}

impl Walker {
    fn bbox(&self) -> BBox {
        BBox::from_xywh(self.x, self.y, self.w, self.h)
    }

    fn advance(&mut self, arena_w: f64, arena_h: f64) {
        self.x += self.vx;
        self.y += self.vy;
        let max_x = arena_w - self.w;
        let max_y = arena_h - self.h;
        if self.x < 0.0 {
            self.x = -self.x;
            self.vx = -self.vx;
        } else if self.x > max_x {
            self.x = 2.0 * max_x - self.x;
            self.vx = -self.vx;
        }
        if self.y < 0.0 {
            self.y = -self.y;
            self.vy = -self.vy;
        } else if self.y > max_y {
            self.y = 2.0 * max_y - self.y;
            self.vy = -self.vy;
        }
        self.x = self.x.clamp(0.0, max_x);
        self.y = self.y.clamp(0.0, max_y);
    }
}

fn spawn(cfg: &ScenarioConfig, index: usize, rng: &mut ScenarioRng) -> Walker {
    let w = rng.range(cfg.box_w_min, cfg.box_w_max);
    let h = w * cfg.aspect;
    let speed = rng.range(cfg.speed_min, cfg.speed_max);
    let (x, y, vx, vy) = match cfg.layout {
        Layout::Random => {
            let heading = rng.range(0.0, std::f64::consts::TAU);
            (
                rng.range(0.0, cfg.arena_w - w),
                rng.range(0.0, cfg.arena_h - h),
                speed * heading.cos(),
                speed * heading.sin(),
            )
        }
        Layout::Crossing => {
            let from_left = index.is_multiple_of(2);
            let band = (cfg.arena_h - h) / 2.0;
            let y = band + rng.range(-0.25, 0.25) * h;
            let margin = rng.range(0.0, 0.3) * cfg.arena_w;
            let x = if from_left { margin } else { cfg.arena_w - w - margin };
            let drift = rng.range(-0.15, 0.15) * speed;
            let vx = if from_left { speed } else { -speed };
            (x.clamp(0.0, cfg.arena_w - w), y.clamp(0.0, cfg.arena_h - h), vx, drift)
        }
    };
    Walker {
        x,
        y,
        vx,
        vy,
        w,
        h,
        identity: rng.unit_vector(cfg.reid_dim),
    }
}

/// Template keypoints of a box with per-joint confidences.
fn template_pose(b: &BBox, confidences: &[f64]) -> Pose {
    Pose::new(
        POSE_TEMPLATE
            .iter()
            .zip(confidences)
            .map(|(&(fx, fy), &c)| Keypoint::new(b.x_min + fx * b.width(), b.y_min + fy * b.height(), c))
            .collect(),
    )
}

fn jittered_box(b: &BBox, sigma: f64, rng: &mut ScenarioRng) -> BBox {
    let mut c = b.to_array();
    for v in &mut c {
        *v += sigma * rng.normal();
    }
    if c[2] < c[0] {
        c.swap(0, 2);
    }
    if c[3] < c[1] {
        c.swap(1, 3);
    }
    BBox::from_array(c)
}

/// Detection stream and ground truth of one scenario; frames share indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub detections: Vec<FrameObservations>,
    pub ground_truth: Vec<TrackedFrame>,
}

/// Generates a scenario; identical configs give identical output.
pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ScenarioRng::new(cfg.seed);
    let mut walkers: Vec<Walker> = (0..cfg.n_persons).map(|i| spawn(cfg, i, &mut rng)).collect();
    let mut paths = Vec::with_capacity(cfg.n_frames);
    for frame in 0..cfg.n_frames {
        if frame > 0 {
            walkers.iter_mut().for_each(|w| w.advance(cfg.arena_w, cfg.arena_h));
        }
        paths.push(walkers.iter().map(Walker::bbox).collect());
    }
    let identities: Vec<ReidFeature> = walkers.into_iter().map(|w| w.identity).collect();
    render(cfg, &mut rng, &paths, &identities)
}

/// Renders detections and ground truth for scripted boxes: `paths[t][i]` is
/// person `i`'s box in frame `t`. Motion settings of `cfg` are ignored.
pub fn generate_scripted(cfg: &ScenarioConfig, paths: &[Vec<BBox>]) -> Result<Scenario> {
    cfg.validate()?;
    let n = paths.first().map_or(0, Vec::len);
    if paths.iter().any(|p| p.len() != n) {
        return Err(Error::Config("every scripted frame needs the same number of people".into()));
    }
    let mut rng = ScenarioRng::new(cfg.seed);
    let identities: Vec<ReidFeature> = (0..n).map(|_| rng.unit_vector(cfg.reid_dim)).collect();
    render(cfg, &mut rng, paths, &identities)
}

/// Index of the occluder of person `i`: among nearer people overlapping by
/// more than the threshold, the one with the largest IoU (lowest index on ties).
fn occluder_of(boxes: &[BBox], i: usize, threshold: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in 0..i {
        let o = iou(&boxes[i], &boxes[j]);
        if o > threshold && best.is_none_or(|(_, b)| o > b) {
            best = Some((j, o));
        }
    }
    best.map(|(j, _)| j)
}

fn render(
    cfg: &ScenarioConfig,
    rng: &mut ScenarioRng,
    paths: &[Vec<BBox>],
    identities: &[ReidFeature],
) -> Result<Scenario> {
    let nk = cfg.num_keypoints;
    let mut detections = Vec::with_capacity(paths.len());
    let mut ground_truth = Vec::with_capacity(paths.len());
    for (frame, boxes) in paths.iter().enumerate() {
        let frame = frame as u64;
        let mut dets = Vec::with_capacity(boxes.len() + 1);
        let mut gts = Vec::with_capacity(boxes.len());
        for (i, identity) in identities.iter().enumerate() {
            let occluder = occluder_of(boxes, i, cfg.occlusion_iou_threshold);

            let confidences: Vec<f64> = (0..nk)
                .map(|_| match occluder {
                    Some(_) => cfg.occluded_confidence_ceiling * (1.0 - rng.uniform()),
                    None => rng.range(0.5, 1.0),
                })
                .collect();

            let mut feature: Vec<f64> = identity
                .as_slice()
                .iter()
                .map(|v| v + cfg.reid_noise_sigma * rng.normal())
                .collect();
            if let Some(j) = occluder {
                let b = cfg.occluded_feature_blend;
                feature
                    .iter_mut()
                    .zip(identities[j].as_slice())
                    .for_each(|(f, o)| *f = (1.0 - b) * *f + b * o);
            }
            let reid = ReidFeature::normalized(feature).unwrap_or_else(|_| identity.clone());

            let gt_pose = template_pose(&boxes[i], &confidences);
            let mut det_pose = gt_pose.clone();
            for k in &mut det_pose.keypoints {
                k.x += cfg.keypoint_jitter * rng.normal();
                k.y += cfg.keypoint_jitter * rng.normal();
            }
            let det_box = jittered_box(&boxes[i], cfg.box_jitter, rng);
            let score = rng.range(0.5, 1.0);
            let missed = rng.bernoulli(cfg.detector_fn_rate);

            gts.push(TrackedDetection {
                id: i as u64 + 1,
                detection: Detection {
                    bbox: boxes[i],
                    pose: gt_pose,
                    reid: identity.clone(),
                    score: 1.0,
                },
                occluded: Some(occluder.is_some()),
            });
            if !missed {
                dets.push(Detection {
                    bbox: det_box,
                    pose: det_pose,
                    reid,
                    score,
                });
            }
        }

        if rng.bernoulli(cfg.detector_fp_rate) {
            let w = rng.range(cfg.box_w_min, cfg.box_w_max);
            let h = w * cfg.aspect;
            let b = BBox::from_xywh(rng.range(0.0, cfg.arena_w - w), rng.range(0.0, cfg.arena_h - h), w, h);
            let confidences: Vec<f64> = (0..nk).map(|_| rng.uniform()).collect();
            let pose = template_pose(&b, &confidences);
            let reid = rng.unit_vector(cfg.reid_dim);
            let score = rng.range(0.3, 0.7);
            dets.push(Detection {
                bbox: b,
                pose,
                reid,
                score,
            });
        }
        rng.shuffle(&mut dets);

        detections.push(FrameObservations {
            seq: cfg.sequence.clone(),
            frame,
            detections: dets,
        });
        ground_truth.push(TrackedFrame {
            seq: cfg.sequence.clone(),
            frame,
            tracks: gts,
        });
    }
    Ok(Scenario {
        detections,
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occlusion::{reid_is_valid, OcclusionConfig};
    use crate::tracker::feature_distance;

    #[test]
    fn single_person_is_never_occluded() {
        let cfg = ScenarioConfig {
            n_persons: 1,
            n_frames: 50,
            ..Default::default()
        };
        let s = generate(&cfg).unwrap();
        assert_eq!(s.detections.iter().map(|f| f.detections.len()).sum::<usize>(), 50);
        assert!(s.ground_truth.iter().all(|f| f.tracks[0].occluded == Some(false)));
    }

    #[test]
    fn same_seed_same_stream() {
        let cfg = ScenarioConfig::crossing(7);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = ScenarioConfig::crossing(8);
        assert_ne!(generate(&cfg).unwrap().detections, generate(&other).unwrap().detections);
    }

    #[test]
    fn rng_uniform_and_normal_are_sane() {
        let mut rng = ScenarioRng::new(1);
        let n = 20_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
            let z = rng.normal();
            sum += z;
            sq += z * z;
        }
        assert!((sum / n as f64).abs() < 0.05);
        assert!((sq / n as f64 - 1.0).abs() < 0.05);
    }

    #[test]
    fn walkers_stay_in_arena() {
        let cfg = ScenarioConfig {
            speed_min: 30.0,
            speed_max: 40.0,
            n_frames: 200,
            ..Default::default()
        };
        let s = generate(&cfg).unwrap();
        let arena = BBox::new(0.0, 0.0, cfg.arena_w, cfg.arena_h);
        for f in &s.ground_truth {
            for t in &f.tracks {
                assert!(arena.contains(&t.detection.bbox));
            }
        }
    }

    #[test]
    fn occluded_detections_fail_the_gate() {
        let cfg = ScenarioConfig::crossing(3);
        let s = generate(&cfg).unwrap();
        let occ = OcclusionConfig::default();
        let mut seen = 0;
        for gt in &s.ground_truth {
            for t in gt.tracks.iter().filter(|t| t.occluded == Some(true)) {
                seen += 1;
                assert!(t.detection.pose.keypoints.iter().all(|k| k.c <= 0.15));
                assert!(!reid_is_valid(&t.detection.pose, &occ).unwrap());
            }
        }
        assert!(seen > 0);
    }

    /// Two people walking head-on along the same line:
    /// x_a(t) = 100 + 5t, x_b(t) = 850 - 5t, boxes 50x125 at y = 200.
    /// The overlap width is max(0, 50 - |x_a - x_b|), so IoU is
    /// overlap / (100 - overlap) and the far person (b) is occluded exactly
    /// when that exceeds 0.3.
    #[test]
    fn crossing_pair_flags_exactly_the_far_person() {
        let frames = 120;
        let paths = head_on_pair(frames);
        let expected_occluded = |t: usize| {
            let xa = 100.0 + 5.0 * t as f64;
            let xb = 850.0 - 5.0 * t as f64;
            let overlap = (50.0 - (xa - xb).abs()).max(0.0);
            overlap / (100.0 - overlap) > 0.3
        };
        let crossing: Vec<usize> = (0..frames).filter(|&t| expected_occluded(t)).collect();
        // |x_a - x_b| = |10t - 750| < 50 * 0.7 / 1.3 ~ 26.9 -> t in 73..=77
        assert_eq!(crossing, vec![73, 74, 75, 76, 77]);

        let s = generate_scripted(&ScenarioConfig::default(), &paths).unwrap();
        for (t, gt) in s.ground_truth.iter().enumerate() {
            let flags: Vec<bool> = gt.tracks.iter().map(|x| x.occluded.unwrap()).collect();
            assert!(!flags[0], "the nearer person is never occluded");
            assert_eq!(flags[1], expected_occluded(t), "frame {t}");
            assert_eq!(flags.iter().filter(|&&f| f).count(), usize::from(expected_occluded(t)));
            if flags[1] {
                assert!(gt.tracks[1].detection.pose.keypoints.iter().all(|k| k.c <= 0.15));
            }
        }
    }

    fn head_on_pair(n: usize) -> Vec<Vec<BBox>> {
        (0..n)
            .map(|t| {
                let xa = 100.0 + 5.0 * t as f64;
                let xb = 850.0 - 5.0 * t as f64;
                vec![
                    BBox::from_xywh(xa, 200.0, 50.0, 125.0),
                    BBox::from_xywh(xb, 200.0, 50.0, 125.0),
                ]
            })
            .collect()
    }

    #[test]
    fn clean_features_are_closest_to_own_identity() {
        let cfg = ScenarioConfig {
            n_persons: 4,
            n_frames: 300,
            occlusion_iou_threshold: 1.0,
            ..Default::default()
        };
        let s = generate(&cfg).unwrap();
        let identities: Vec<ReidFeature> = s.ground_truth[0].tracks.iter().map(|t| t.detection.reid.clone()).collect();
        let mut draws = 0;
        let (mut own_sum, mut other_sum) = (0.0, 0.0);
        for gt in &s.ground_truth {
            let f = gt.frame as usize;
            for det in &s.detections[f].detections {
                // identify the detection's person by its nearest gt box
                let owner = gt
                    .tracks
                    .iter()
                    .max_by(|a, b| iou(&a.detection.bbox, &det.bbox).total_cmp(&iou(&b.detection.bbox, &det.bbox)))
                    .unwrap();
                let own = feature_distance(&det.reid, &identities[owner.id as usize - 1]).unwrap();
                for (k, other) in identities.iter().enumerate() {
                    if k as u64 + 1 != owner.id {
                        let d = feature_distance(&det.reid, other).unwrap();
                        other_sum += d;
                        assert!(own < d);
                    }
                }
                own_sum += own;
                draws += 1;
            }
        }
        assert!(draws >= 1000);
        assert!(own_sum / (draws as f64) < other_sum / ((3 * draws) as f64));
    }
}
